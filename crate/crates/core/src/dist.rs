//! Distribution functions and quantiles used by the generating equations.

use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, Result};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn norm_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Standard Laplace quantile `-sgn(u - 1/2) ln(1 - 2|u - 1/2|)`.
pub fn laplace_quantile(u: f64) -> f64 {
    let d = u - 0.5;
    -d.signum() * (1.0 - 2.0 * d.abs()).ln()
}

/// Geometric number of failures before the first success, where each trial
/// fails with probability `q`: `ceil(ln(1-u)/ln q) - 1`, floored at 0.
pub fn geometric_failures(u: f64, q: f64) -> f64 {
    ((1.0 - u).ln() / q.ln()).ceil().max(1.0) - 1.0
}

/// Quantile of Gamma(shape, rate) by safeguarded Newton iteration.
pub fn gamma_quantile(u: f64, shape: f64, rate: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, shape.max(1.0));
    while gamma_lr(shape, hi) < u {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = gamma_lr(shape, x) - u;
        if f.abs() < 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dens = ((shape - 1.0) * x.ln() - x - ln_gamma(shape)).exp();
        let step = x - f / dens;
        x = if dens > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    x / rate
}

/// Cumulative Poisson probabilities `P(X <= k)` for `k < len`.
pub fn poisson_cdf_table(lambda: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        let lp = if lambda == 0.0 {
            if k == 0 { 0.0 } else { f64::NEG_INFINITY }
        } else {
            -lambda + k as f64 * lambda.ln() - ln_gamma(k as f64 + 1.0)
        };
        acc += lp.exp();
        out.push(acc.min(1.0));
    }
    out
}

/// Poisson quantile by cumulative pmf summation, capped at mean + 20 sd.
pub fn poisson_quantile(u: f64, lambda: f64) -> Result<u64> {
    let cap = (lambda + 20.0 * lambda.sqrt()).ceil() as u64 + 20;
    let mut acc = 0.0;
    let mut lp = -lambda;
    for k in 0..=cap {
        if k > 0 {
            lp += lambda.ln() - (k as f64).ln();
        }
        acc += lp.exp();
        if u <= acc {
            return Ok(k);
        }
    }
    invalid(format!("Poisson quantile for u = {u} exceeds the cap {cap} at mean {lambda}"))
}

/// Cumulative Binomial(n, p) probabilities `P(X <= k)`, k = 0..=n.
pub fn binomial_cdf_table(n: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    if p <= 0.0 {
        return vec![1.0; n as usize + 1];
    }
    if p >= 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[n as usize] = 1.0;
        return v;
    }
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let ln_n = ln_gamma(n as f64 + 1.0);
    let mut acc = 0.0;
    for k in 0..=n {
        let kf = k as f64;
        let l = ln_n - ln_gamma(kf + 1.0) - ln_gamma((n - k) as f64 + 1.0) + kf * lp + (n - k) as f64 * lq;
        acc += l.exp();
        out.push(acc.min(1.0));
    }
    out
}

/// Smallest index `k` with `u <= cdf[k]`; the last index if none.
pub fn table_quantile(u: f64, cdf: &[f64]) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(expit(t))` without cancellation.
fn ln_expit(t: f64) -> f64 {
    if t > 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

pub fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// Beta quantiles tabulated on a grid in logit space.
///
/// With `t = logit(u)` and `y = logit(F^{-1}(u))`, the map `t -> y` is smooth
/// and asymptotically linear in both tails, so piecewise cubic Hermite
/// interpolation with exact slopes reproduces the quantile to about 1e-6 in
/// `x` across the whole unit interval.
#[derive(Debug, Clone)]
pub struct BetaQuantileTable {
    y: Vec<f64>,
    slope: Vec<f64>,
}

pub const BETA_GRID_LO: f64 = -40.0;
pub const BETA_GRID_STEP: f64 = 0.2;
pub const BETA_GRID_NODES: usize = 401;

/// Grid cell and local coordinate of `t = logit(u)`, precomputed per seed.
pub fn beta_grid_position(u: f64) -> (f64, f64) {
    let t = logit(u);
    let pos = (t - BETA_GRID_LO) / BETA_GRID_STEP;
    let j = pos.floor().clamp(0.0, (BETA_GRID_NODES - 2) as f64);
    (j, pos - j)
}

impl BetaQuantileTable {
    pub fn new(a: f64, b: f64) -> Self {
        let lb = ln_beta(a, b);
        let mut y = Vec::with_capacity(BETA_GRID_NODES);
        let mut slope = Vec::with_capacity(BETA_GRID_NODES);
        let mut guess: Option<f64> = None;
        for k in 0..BETA_GRID_NODES {
            let t = BETA_GRID_LO + k as f64 * BETA_GRID_STEP;
            let yk = beta_logit_quantile(t, a, b, lb, guess);
            let m = beta_logit_slope(t, yk, a, b, lb);
            y.push(yk);
            slope.push(m);
            guess = Some(yk + m * BETA_GRID_STEP);
        }
        BetaQuantileTable { y, slope }
    }

    /// Quantile for a seed with precomputed grid position `(j, w)`.
    pub fn quantile_at(&self, j: f64, w: f64) -> f64 {
        let j = j as usize;
        let h = BETA_GRID_STEP;
        let (y0, y1, m0, m1) = (self.y[j], self.y[j + 1], self.slope[j], self.slope[j + 1]);
        let yv = if w < 0.0 {
            y0 + m0 * h * w
        } else if w > 1.0 {
            y1 + m1 * h * (w - 1.0)
        } else {
            let w2 = w * w;
            let w3 = w2 * w;
            (2.0 * w3 - 3.0 * w2 + 1.0) * y0
                + (w3 - 2.0 * w2 + w) * h * m0
                + (-2.0 * w3 + 3.0 * w2) * y1
                + (w3 - w2) * h * m1
        };
        expit(yv)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let (j, w) = beta_grid_position(u);
        self.quantile_at(j, w)
    }
}

/// `dy/dt` for `y = logit(F^{-1}(expit(t)))`.
fn beta_logit_slope(t: f64, y: f64, a: f64, b: f64, lb: f64) -> f64 {
    let (lu, l1u) = (ln_expit(t), ln_expit(-t));
    let (lx, l1x) = (ln_expit(y), ln_expit(-y));
    (lu + l1u + lb - a * lx - b * l1x).exp()
}

/// Solves `F(expit(y)) = expit(t)` for `y`, working with the smaller tail.
fn beta_logit_quantile(t: f64, a: f64, b: f64, lb: f64, guess: Option<f64>) -> f64 {
    // lower tail: ln I_x(a,b) = ln u; upper tail: ln I_{1-x}(b,a) = ln(1-u)
    let lower = t <= 0.0;
    let target = if lower { ln_expit(t) } else { ln_expit(-t) };
    let g = |y: f64| -> f64 {
        let v = if lower {
            beta_reg(a, b, expit(y))
        } else {
            beta_reg(b, a, expit(-y))
        };
        let lv = if v > 0.0 { v.ln() } else { -1e300 };
        if lower { lv - target } else { target - lv }
    };
    let dg = |y: f64, gy: f64| -> f64 {
        // d/dy ln I = f(x) x (1-x) / I
        let (lx, l1x) = (ln_expit(y), ln_expit(-y));
        let ldens = a * lx + b * l1x - lb;
        let lv = if lower { gy + target } else { target - gy };
        (ldens - lv).exp()
    };
    let (mut lo, mut hi) = (-745.0_f64, 745.0_f64);
    let mut y = guess.unwrap_or(0.0).clamp(lo + 1.0, hi - 1.0);
    for _ in 0..300 {
        let gy = g(y);
        if gy == 0.0 {
            return y;
        }
        if gy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let d = dg(y, gy);
        let step = y - gy / d;
        let next = if d.is_finite() && d > 0.0 && step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if (next - y).abs() < 1e-12 * (1.0 + y.abs()) || hi - lo < 1e-12 {
            return next;
        }
        y = next;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_and_quantile() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.6449) - 0.95).abs() < 1e-4);
        for p in [1e-10, 0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-12 * p.max(1e-3) * 1e3);
        }
    }

    #[test]
    fn laplace_quantile_at_point_nine() {
        assert!((laplace_quantile(0.9) - 5f64.ln()).abs() < 1e-12);
        assert_eq!(laplace_quantile(0.5), 0.0);
        assert!((laplace_quantile(0.1) + 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn geometric_convention_counts_failures() {
        let q = (-1.0f64).exp();
        assert_eq!(geometric_failures(1e-9, q), 0.0);
        // P(G = 0) = 1 - q
        assert_eq!(geometric_failures(1.0 - q - 1e-9, q), 0.0);
        assert_eq!(geometric_failures(1.0 - q + 1e-9, q), 1.0);
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for &(shape, u) in &[(3.0, 0.5), (2.0, 0.01), (5.0, 0.999)] {
            let x = gamma_quantile(u, shape, 2.0);
            assert!((gamma_lr(shape, 2.0 * x) - u).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_quantile_matches_table() {
        let table = poisson_cdf_table(10.0, 60);
        for u in [0.001, 0.2, 0.5, 0.77, 0.9999] {
            assert_eq!(poisson_quantile(u, 10.0).unwrap() as usize, table_quantile(u, &table));
        }
        assert_eq!(poisson_quantile(0.3, 0.0).unwrap(), 0);
    }

    #[test]
    fn beta_table_matches_exact_quantiles() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 5.0), (0.2, 3.0), (8.0, 0.7)] {
            let table = BetaQuantileTable::new(a, b);
            for u in [1e-12, 1e-6, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
                let x = table.quantile(u);
                let back = beta_reg(a, b, x);
                let tol = 1e-5 * u.min(1.0 - u).max(1e-3);
                assert!((back - u).abs() < tol.max(1e-11), "a={a} b={b} u={u} x={x} F={back}");
            }
        }
        assert!((BetaQuantileTable::new(0.5, 0.5).quantile(0.5) - 0.5).abs() < 1e-9);
    }
}
