//! Privacy mechanisms written as deterministic functions of their seeds.

mod knorm;
mod objpert;

pub use knorm::{hull_ball, knorm_mechanism, knorm_noise, norm_gauge, sample_linf_density, NormBall};
pub use objpert::{objective_perturbation, LogisticLoss, ObjPertConfig, SmoothLoss};

use crate::dist::{geometric_failures, laplace_quantile};
use crate::error::{invalid, Result};

/// `[x]_a^b = min(max(x, a), b)`.
pub fn clamp(x: f64, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return invalid(format!("clamp bounds reversed: {a} > {b}"));
    }
    Ok(x.max(a).min(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

impl NoiseKind {
    /// Noise value for one seed: Laplace seeds are uniforms, Gaussian seeds
    /// are stored as standard normal values.
    pub fn noise(self, seed: f64) -> f64 {
        match self {
            NoiseKind::Laplace => laplace_quantile(seed),
            NoiseKind::Gaussian => seed,
        }
    }
}

/// `stat + scale * N` with `N` built from `dp_seeds`.
pub fn additive_mechanism(stat: &[f64], scale: f64, kind: NoiseKind, dp_seeds: &[f64]) -> Result<Vec<f64>> {
    if !(scale > 0.0) {
        return invalid(format!("mechanism scale must be positive, got {scale}"));
    }
    if dp_seeds.len() != stat.len() {
        return invalid("one noise seed per released coordinate is required");
    }
    Ok(stat
        .iter()
        .zip(dp_seeds)
        .map(|(s, u)| s + scale * kind.noise(*u))
        .collect())
}

/// Tulap(0, e^{-epsilon}, 0) draw `G1 - G2 + U` from three uniform seeds.
pub fn sample_tulap(seeds: &[f64; 3], epsilon: f64) -> f64 {
    let q = (-epsilon).exp();
    geometric_failures(seeds[0], q) - geometric_failures(seeds[1], q) + (seeds[2] - 0.5)
}

/// Cdf of Tulap(0, b, 0).
pub fn tulap_cdf(x: f64, b: f64) -> f64 {
    let r = x.round();
    if x <= 0.0 {
        b.powf(-r) / (1.0 + b) * (b + (x - r + 0.5) * (1.0 - b))
    } else {
        1.0 - b.powf(r) / (1.0 + b) * (b + (r - x + 0.5) * (1.0 - b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Domain, Stream};

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(5.0, 0.0, 3.0).unwrap(), 3.0);
        assert_eq!(clamp(2.0, 0.0, 3.0).unwrap(), 2.0);
        assert_eq!(clamp(-1.0, 0.0, 3.0).unwrap(), 0.0);
        assert!(clamp(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn additive_examples() {
        let out = additive_mechanism(&[1.0, 2.0], 3.0, NoiseKind::Laplace, &[0.5, 0.5]).unwrap();
        assert_eq!(out, vec![1.0, 2.0]);
        let out = additive_mechanism(&[1.0], 2.0, NoiseKind::Gaussian, &[0.3]).unwrap();
        assert_eq!(out, vec![1.0 + 2.0 * 0.3]);
        let out = additive_mechanism(&[0.0], 1.0, NoiseKind::Laplace, &[0.9]).unwrap();
        assert!((out[0] - 1.6094).abs() < 1e-4);
    }

    #[test]
    fn tulap_zero_trace() {
        assert_eq!(sample_tulap(&[0.1, 0.2, 0.5], 1.0), 0.0);
    }

    #[test]
    fn tulap_symmetric_and_matches_cdf() {
        let mut s = Stream::new(11, Domain::Test, 0, 0);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_tulap(&[s.uniform(), s.uniform(), s.uniform()], 1.0))
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * (var / n as f64).sqrt());
        draws.sort_by(|a, b| a.total_cmp(b));
        let b = (-1.0f64).exp();
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = tulap_cdf(x, b);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "ks = {ks}");
    }
}
