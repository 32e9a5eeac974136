use std::fmt;
use std::sync::Arc;

use crate::dist::gamma_quantile;
use crate::engine::Stream;
use crate::error::{invalid, Error, Result};

/// A closed convex symmetric set used as the unit ball of a norm.
#[derive(Clone)]
pub struct NormBall {
    pub membership: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
    pub linf_radius: f64,
    pub dim: usize,
    pub label: String,
}

impl fmt::Debug for NormBall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormBall({}, radius {})", self.label, self.linf_radius)
    }
}

impl NormBall {
    pub fn contains(&self, u: &[f64]) -> bool {
        (self.membership)(u)
    }
}

/// Convex hull of the sensitivity space of `(sum z, sum z^2)` for `z` in [0, 1].
pub fn hull_ball() -> NormBall {
    NormBall {
        membership: Arc::new(|u: &[f64]| {
            let (u1, u2) = (u[0], u[1]);
            if !(-1.0..=1.0).contains(&u1) {
                return false;
            }
            if u1 <= -0.5 {
                (u1 + 1.0).powi(2) - 1.0 <= u2 && u2 <= -u1 * u1
            } else if u1 <= 0.5 {
                u1 - 0.25 <= u2 && u2 <= u1 + 0.25
            } else {
                u1 * u1 <= u2 && u2 <= 1.0 - (u1 - 1.0).powi(2)
            }
        }),
        linf_radius: 1.0,
        dim: 2,
        label: "moment hull".into(),
    }
}

/// Gauge `inf { t > 0 : v / t in K }` by bisection.
pub fn norm_gauge(ball: &NormBall, v: &[f64]) -> f64 {
    if v.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let inside = |t: f64| ball.contains(&v.iter().map(|x| x / t).collect::<Vec<_>>());
    let mut hi = 1.0;
    while !inside(hi) {
        hi *= 2.0;
    }
    while inside(hi / 2.0) {
        hi /= 2.0;
    }
    let mut lo = hi / 2.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Draw with density proportional to `exp(-c |V|_inf)` from `m + 1` uniform
/// seeds: the first sets the radius, the rest the direction.
pub fn sample_linf_density(c: f64, m: usize, seeds: &[f64]) -> Result<Vec<f64>> {
    if !(c > 0.0) || m == 0 {
        return invalid("sample_linf_density needs c > 0 and m >= 1");
    }
    if seeds.len() != m + 1 {
        return invalid(format!("sample_linf_density needs {} seeds, got {}", m + 1, seeds.len()));
    }
    let r = gamma_quantile(seeds[0], (m + 1) as f64, c);
    Ok(seeds[1..].iter().map(|u| r * (2.0 * u - 1.0)).collect())
}

const MAX_PROPOSALS: u64 = 1_000_000;

/// Noise with density proportional to `exp(-(epsilon/delta_k) |v|_K)`:
/// a Gamma radius times a point drawn uniformly from `K` by rejection from
/// its bounding box. All randomness comes from `stream`.
pub fn knorm_noise(epsilon: f64, delta_k: f64, ball: &NormBall, stream: &mut Stream) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) || !(delta_k > 0.0) {
        return invalid("K-norm mechanism needs epsilon > 0 and delta_k > 0");
    }
    let m = ball.dim;
    let r = gamma_quantile(stream.uniform(), (m + 1) as f64, epsilon / delta_k);
    let mut u = vec![0.0; m];
    for proposals in 1..=MAX_PROPOSALS {
        for v in u.iter_mut() {
            *v = ball.linf_radius * (2.0 * stream.uniform() - 1.0);
        }
        if ball.contains(&u) {
            return Ok(u.iter().map(|v| r * v).collect());
        }
        if proposals == MAX_PROPOSALS {
            break;
        }
    }
    Err(Error::PathologicalBall {
        rate: 0.0,
        proposals: MAX_PROPOSALS,
    })
}

pub fn knorm_mechanism(
    stat: &[f64],
    epsilon: f64,
    delta_k: f64,
    ball: &NormBall,
    stream: &mut Stream,
) -> Result<Vec<f64>> {
    if stat.len() != ball.dim {
        return invalid("statistic and norm ball dimensions differ");
    }
    let noise = knorm_noise(epsilon, delta_k, ball, stream)?;
    Ok(stat.iter().zip(noise).map(|(s, n)| s + n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Domain;

    #[test]
    fn hull_membership_examples() {
        let k = hull_ball();
        assert!(k.contains(&[0.0, 0.0]));
        assert!(k.contains(&[-0.6, -0.5]));
        assert!(!k.contains(&[0.0, 0.3]));
        assert!(k.contains(&[0.5, 0.75]));
        assert!(k.contains(&[1.0, 1.0]));
        assert!(!k.contains(&[1.0, 0.99]));
    }

    #[test]
    fn hull_is_symmetric() {
        let k = hull_ball();
        let mut s = Stream::new(3, Domain::Test, 0, 0);
        for _ in 0..10_000 {
            let u = [2.4 * s.uniform() - 1.2, 2.4 * s.uniform() - 1.2];
            assert_eq!(k.contains(&u), k.contains(&[-u[0], -u[1]]));
        }
    }

    #[test]
    fn linf_center_seeds_give_zero() {
        let v = sample_linf_density(2.0, 3, &[0.8, 0.5, 0.5, 0.5]).unwrap();
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn gauge_of_boundary_point_is_one() {
        let k = hull_ball();
        assert!((norm_gauge(&k, &[1.0, 1.0]) - 1.0).abs() < 1e-9);
        assert!((norm_gauge(&k, &[0.5, 0.75]) - 1.0).abs() < 1e-9);
        assert!((norm_gauge(&k, &[1.0, 1.5]) - 2.0).abs() < 1e-9);
    }
}
