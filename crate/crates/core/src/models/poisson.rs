use std::sync::Arc;

use crate::depth::{pivot_from, Orientation, PivotFn, TestStatistic};
use crate::dist::{poisson_cdf_table, poisson_quantile};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::Result;

use super::{count_leq_sorted, require, sorted};

/// Clamped Poisson mean with Gaussian noise:
/// `s = (1/n) sum [F^{-1}(u_i; theta)]_0^c + (c/(n eps)) N`.
#[derive(Debug, Clone)]
pub struct PoissonClamped {
    n: usize,
    c: usize,
    epsilon: f64,
    pbox: ParamBox,
}

/// Mean and variance of `min(X, c)` for `X ~ Poisson(theta)`.
fn clamped_moments(theta: f64, c: usize) -> (f64, f64) {
    let cdf = poisson_cdf_table(theta, c);
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, f) in cdf.iter().enumerate() {
        let tail = 1.0 - f;
        m1 += tail;
        m2 += (2 * k + 1) as f64 * tail;
    }
    (m1, (m2 - m1 * m1).max(0.0))
}

impl PoissonClamped {
    pub fn new(n: usize, c: usize, epsilon: f64, theta_max: f64) -> Result<Self> {
        require(n >= 1, "poisson model needs n >= 1")?;
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        require(theta_max > 0.0, "theta_max must be positive")?;
        if c == 0 {
            log::warn!("clamping threshold c = 0 makes the release pure noise; theta is not identifiable");
        }
        Ok(PoissonClamped {
            n,
            c,
            epsilon,
            pbox: ParamBox::new(vec![0.0], vec![theta_max], &["theta"])?.with_interest(0)?,
        })
    }

    fn noise_scale(&self) -> f64 {
        self.c as f64 / (self.n as f64 * self.epsilon)
    }

    /// Sum of clamped values from `P(X <= k)` for `k < c` and sorted uniforms:
    /// `sum_i min(x_i, c) = sum_{k<c} #{x_i > k}`.
    fn clamped_sum_sorted(&self, cdf: &[f64], sorted_u: &[f64]) -> f64 {
        cdf.iter()
            .map(|&f| (self.n - count_leq_sorted(sorted_u, f)) as f64)
            .sum()
    }
}

impl Model for PoissonClamped {
    fn name(&self) -> &str {
        "poisson"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: self.n, dp_dims: 1 }
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn privacy_label(&self) -> String {
        format!("{}-GDP", self.epsilon)
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; self.n];
        src.stream(0).fill_uniform(&mut data);
        Seed::new(data, vec![src.stream(1).normal()])
    }

    fn prepare_seed(&self, seed: &mut Seed) {
        seed.aux = sorted(&seed.data);
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let sum = if seed.aux.len() == self.n {
            self.clamped_sum_sorted(&poisson_cdf_table(theta[0], self.c), &seed.aux)
        } else {
            let mut acc = 0.0;
            for &u in &seed.data {
                acc += poisson_quantile(u, theta[0])?.min(self.c as u64) as f64;
            }
            acc
        };
        out[0] = sum / self.n as f64 + self.noise_scale() * seed.dp[0];
        Ok(())
    }

    fn generate_bank(&self, theta: &[f64], seeds: &[Seed], out: &mut [f64]) -> Result<()> {
        let cdf = poisson_cdf_table(theta[0], self.c);
        for (seed, o) in seeds.iter().zip(out.iter_mut()) {
            if seed.aux.len() != self.n {
                self.generate_into(theta, seed, std::slice::from_mut(o))?;
                continue;
            }
            *o = self.clamped_sum_sorted(&cdf, &seed.aux) / self.n as f64 + self.noise_scale() * seed.dp[0];
        }
        Ok(())
    }

    /// Two-sided standardized release: `(s - E s) / sd(s)` under theta.
    fn default_statistic(&self) -> TestStatistic {
        pivot_from(
            Arc::new(StandardizedMean {
                c: self.c,
                n: self.n as f64,
                noise_var: self.noise_scale().powi(2),
            }),
            Orientation::TwoSided,
            "standardized-mean",
        )
    }

    fn pivot_statistic(&self) -> Option<TestStatistic> {
        Some(self.default_statistic())
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        let hi = self.pbox.upper[0].min(10.0 * (self.c as f64).max(1.0));
        Some(vec![s.0[0].clamp(0.0, hi)])
    }
}

struct StandardizedMean {
    c: usize,
    n: f64,
    noise_var: f64,
}

impl PivotFn for StandardizedMean {
    fn eval(&self, theta: &[f64], points: &[f64], _d: usize, out: &mut [f64]) -> Result<()> {
        let (mean, var) = clamped_moments(theta[0], self.c);
        let sd = (var / self.n + self.noise_var).sqrt();
        for (o, s) in out.iter_mut().zip(points) {
            *o = (s - mean) / sd;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{draw_one, generate, Domain};

    #[test]
    fn clamped_moments_match_direct_sums() {
        for (theta, c) in [(10.0, 14usize), (3.0, 4), (50.0, 10), (0.5, 3)] {
            let (mut m1, mut m2) = (0.0, 0.0);
            let mut pk = (-theta as f64).exp();
            for k in 0..400u32 {
                if k > 0 {
                    pk *= theta / k as f64;
                }
                let v = (k as usize).min(c) as f64;
                m1 += v * pk;
                m2 += v * v * pk;
            }
            let (mean, var) = clamped_moments(theta, c);
            assert!((mean - m1).abs() < 1e-9, "{theta} {c}");
            assert!((var - (m2 - m1 * m1)).abs() < 1e-9);
        }
    }

    #[test]
    fn sorted_path_matches_quantile_path() {
        let m = PoissonClamped::new(60, 12, 1.0, f64::INFINITY).unwrap();
        for i in 0..10 {
            let prepared = draw_one(&m, 5, Domain::Bank, i);
            let raw = Seed::new(prepared.data.clone(), prepared.dp.clone());
            for theta in [0.0, 0.7, 9.3, 14.0, 40.0] {
                let a = generate(&m, &[theta], &prepared).unwrap().0[0];
                let b = generate(&m, &[theta], &raw).unwrap().0[0];
                assert!((a - b).abs() < 1e-12, "theta {theta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn huge_theta_clamps_everything() {
        let m = PoissonClamped::new(10, 4, 1.0, f64::INFINITY).unwrap();
        let seed = draw_one(&m, 1, Domain::Bank, 0);
        let s = generate(&m, &[2f64.powi(60)], &seed).unwrap().0[0];
        assert!((s - (4.0 + 0.4 * seed.dp[0])).abs() < 1e-12);
    }
}
