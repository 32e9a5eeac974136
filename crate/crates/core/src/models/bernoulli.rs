use crate::depth::{depth_statistic, pivot_statistic, DepthKind, Orientation, TestStatistic};
use crate::dist::{binomial_cdf_table, norm_quantile, table_quantile};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::{invalid, Result};
use crate::mechanisms::sample_tulap;

use super::{count_leq_sorted, require, sorted};

/// Bernoulli counts released with Tulap noise:
/// `s = sum I(u_i <= p) + Tulap(0, e^-eps, 0)`.
#[derive(Debug, Clone)]
pub struct BernoulliTulap {
    n: usize,
    epsilon: f64,
    pbox: ParamBox,
}

impl BernoulliTulap {
    pub fn new(n: usize, epsilon: f64) -> Result<Self> {
        require(n >= 1, "bernoulli model needs n >= 1")?;
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        Ok(BernoulliTulap {
            n,
            epsilon,
            pbox: ParamBox::new(vec![0.0], vec![1.0], &["p"])?.with_interest(0)?,
        })
    }

    fn tulap(&self, seed: &Seed) -> f64 {
        sample_tulap(&[seed.dp[0], seed.dp[1], seed.dp[2]], self.epsilon)
    }
}

impl Model for BernoulliTulap {
    fn name(&self) -> &str {
        "bernoulli"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: self.n, dp_dims: 3 }
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn privacy_label(&self) -> String {
        format!("{}-DP", self.epsilon)
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; self.n];
        src.stream(0).fill_uniform(&mut data);
        let mut dp = vec![0.0; 3];
        src.stream(1).fill_uniform(&mut dp);
        Seed::new(data, dp)
    }

    // aux = [tulap noise, sorted uniforms...]
    fn prepare_seed(&self, seed: &mut Seed) {
        let mut aux = vec![self.tulap(seed)];
        aux.extend(sorted(&seed.data));
        seed.aux = aux;
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let p = theta[0];
        out[0] = if seed.aux.len() == self.n + 1 {
            count_leq_sorted(&seed.aux[1..], p) as f64 + seed.aux[0]
        } else {
            seed.data.iter().filter(|&&u| u <= p).count() as f64 + self.tulap(seed)
        };
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 1).expect("valid dimension")
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        Some(vec![(s.0[0] / self.n as f64).clamp(0.0, 1.0)])
    }
}

const PRELIMINARY_MISS: f64 = 1e-4;

/// Noisy counts of ones and zeros from an unknown number of Bernoulli trials:
/// `s = (X + N1, n - X + N2)` with `X ~ Bin(n, p)` and `N ~ N(0, 1/eps^2)`.
#[derive(Debug, Clone)]
pub struct BernoulliUnknownN {
    epsilon: f64,
    pbox: ParamBox,
}

impl BernoulliUnknownN {
    pub fn new(epsilon: f64, n_max: f64) -> Result<Self> {
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        require(n_max >= 1.0 && n_max.is_finite(), "n_max must be at least 1")?;
        let pbox = ParamBox::new(vec![0.0, 1.0], vec![1.0, n_max.floor()], &["p", "n"])?
            .with_interest(0)?
            .with_integer(1);
        Ok(BernoulliUnknownN { epsilon, pbox })
    }

    fn release(&self, x: f64, n: f64, seed: &Seed, out: &mut [f64]) {
        out[0] = x + seed.dp[0] / self.epsilon;
        out[1] = n - x + seed.dp[1] / self.epsilon;
    }
}

impl Model for BernoulliUnknownN {
    fn name(&self) -> &str {
        "bernoulli-unknown-n"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: 1, dp_dims: 2 }
    }

    fn summary_dim(&self) -> usize {
        2
    }

    fn privacy_label(&self) -> String {
        format!("{}-GDP", self.epsilon)
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0];
        src.stream(0).fill_uniform(&mut data);
        let mut dp = vec![0.0; 2];
        src.stream(1).fill_normal(&mut dp);
        Seed::new(data, dp)
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        self.generate_bank(theta, std::slice::from_ref(seed), out)
    }

    fn generate_bank(&self, theta: &[f64], seeds: &[Seed], out: &mut [f64]) -> Result<()> {
        let n = theta[1];
        if n.fract() != 0.0 || n < 1.0 {
            return invalid(format!("trial count must be a positive integer, got {n}"));
        }
        let cdf = binomial_cdf_table(n as u64, theta[0]);
        for (seed, row) in seeds.iter().zip(out.chunks_mut(2)) {
            let x = table_quantile(seed.data[0], &cdf) as f64;
            self.release(x, n, seed, row);
        }
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 2).expect("valid dimension")
    }

    fn pivot_statistic(&self) -> Option<TestStatistic> {
        let eps2 = self.epsilon * self.epsilon;
        Some(pivot_statistic(
            move |theta: &[f64], s: &[f64]| {
                let p = theta[0];
                let n_hat = (s[0] + s[1]).max(1.0);
                (s[0] - n_hat * p) / (n_hat * p * (1.0 - p) + (p * p + (1.0 - p) * (1.0 - p)) / eps2).sqrt()
            },
            Orientation::TwoSided,
            "count-pivot",
        ))
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        let n_hat = (s.0[0] + s.0[1]).round().clamp(self.pbox.lower[1], self.pbox.upper[1]);
        Some(vec![(s.0[0] / n_hat).clamp(0.0, 1.0), n_hat])
    }

    /// Restricts `n` to a `1 - 1e-4` interval from `s1 + s2 ~ N(n, 2/eps^2)`.
    fn search_box(&self, s_obs: &Summary) -> Result<ParamBox> {
        let total = s_obs.0[0] + s_obs.0[1];
        let half = norm_quantile(1.0 - PRELIMINARY_MISS / 2.0) * 2f64.sqrt() / self.epsilon;
        let lo = (total - half).ceil().max(self.pbox.lower[1]);
        let hi = (total + half).floor().min(self.pbox.upper[1]);
        if lo > hi {
            return invalid(format!("preliminary range for n is empty around {total}"));
        }
        Ok(self.pbox.restrict(1, lo, hi))
    }

    fn level_spent(&self) -> f64 {
        PRELIMINARY_MISS
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{draw_one, generate, Domain};

    #[test]
    fn endpoints_of_p() {
        let m = BernoulliTulap::new(50, 1.0).unwrap();
        let seed = draw_one(&m, 3, Domain::Bank, 0);
        let noise = m.tulap(&seed);
        assert_eq!(generate(&m, &[0.0], &seed).unwrap().0[0], noise);
        assert_eq!(generate(&m, &[1.0], &seed).unwrap().0[0], 50.0 + noise);
    }

    #[test]
    fn prepared_and_raw_seeds_agree() {
        let m = BernoulliTulap::new(40, 1.0).unwrap();
        for i in 0..20 {
            let prepared = draw_one(&m, 9, Domain::Bank, i);
            let raw = Seed::new(prepared.data.clone(), prepared.dp.clone());
            for p in [0.0, 0.13, 0.5, 0.99] {
                assert_eq!(generate(&m, &[p], &prepared).unwrap(), generate(&m, &[p], &raw).unwrap());
            }
        }
    }

    #[test]
    fn pivot_is_zero_at_plugin_without_noise() {
        let m = BernoulliUnknownN::new(1.0, 1000.0).unwrap();
        let stat = m.pivot_statistic().unwrap();
        // s = (20, 80): n_hat = 100, p = 0.2 puts the numerator at zero
        let mut out = [0.0];
        stat.evaluate(&[0.2, 100.0], &[20.0, 80.0], 2, &mut out).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn preliminary_box_is_integer_range() {
        let m = BernoulliUnknownN::new(1.0, 1000.0).unwrap();
        let b = m.search_box(&Summary(vec![20.3, 79.9])).unwrap();
        assert_eq!((b.lower[1], b.upper[1]), (95.0, 105.0));
        assert!(b.lower[1].fract() == 0.0 && b.upper[1].fract() == 0.0);
    }
}
