use crate::depth::{depth_statistic, DepthKind, TestStatistic};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::Result;
use crate::mechanisms::NoiseKind;

use super::{count_lt_sorted, prefix_sums, require, sorted};

/// Clamped exponential mean with Laplace noise:
/// `s = (1/n) sum [-mu ln(1 - u_i)]_0^c + (c/(n eps)) Laplace(0, 1)`.
#[derive(Debug, Clone)]
pub struct ExponentialClamped {
    n: usize,
    c: f64,
    epsilon: f64,
    pbox: ParamBox,
}

impl ExponentialClamped {
    pub fn new(n: usize, c: f64, epsilon: f64) -> Result<Self> {
        require(n >= 1, "exponential model needs n >= 1")?;
        require(c > 0.0 && c.is_finite(), format!("clamping threshold must be positive, got {c}"))?;
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        Ok(ExponentialClamped {
            n,
            c,
            epsilon,
            pbox: ParamBox::new(vec![1e-6], vec![100.0], &["mu"])?.with_interest(0)?,
        })
    }

    pub fn clamp_at(&self) -> f64 {
        self.c
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn noise(&self, seed: &Seed) -> f64 {
        self.c / (self.n as f64 * self.epsilon) * NoiseKind::Laplace.noise(seed.dp[0])
    }
}

impl Model for ExponentialClamped {
    fn name(&self) -> &str {
        "exponential"
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
        format!("{}-DP", self.epsilon)
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; self.n];
        src.stream(0).fill_uniform(&mut data);
        Seed::new(data, vec![src.stream(1).uniform()])
    }

    // aux = [sorted standard exponentials | prefix sums]
    fn prepare_seed(&self, seed: &mut Seed) {
        let e: Vec<f64> = seed.data.iter().map(|u| -(-u).ln_1p()).collect();
        let e = sorted(&e);
        let mut aux = e.clone();
        aux.extend(prefix_sums(&e));
        seed.aux = aux;
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let mu = theta[0];
        let sum = if seed.aux.len() == 2 * self.n + 1 {
            let e = &seed.aux[..self.n];
            let k = count_lt_sorted(e, self.c / mu);
            mu * seed.aux[self.n + k] + self.c * (self.n - k) as f64
        } else {
            seed.data.iter().map(|u| (-mu * (-u).ln_1p()).min(self.c)).sum()
        };
        out[0] = sum / self.n as f64 + self.noise(seed);
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 1).expect("valid dimension")
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        Some(vec![s.0[0].clamp(self.pbox.lower[0], self.pbox.upper[0])])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{draw_one, generate, Domain};

    #[test]
    fn sorted_path_matches_direct_path() {
        let m = ExponentialClamped::new(80, 20.0, 1.0).unwrap();
        for i in 0..10 {
            let prepared = draw_one(&m, 8, Domain::Bank, i);
            let raw = Seed::new(prepared.data.clone(), prepared.dp.clone());
            for mu in [1e-6, 0.3, 10.0, 55.0, 100.0] {
                let a = generate(&m, &[mu], &prepared).unwrap().0[0];
                let b = generate(&m, &[mu], &raw).unwrap().0[0];
                assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()), "{mu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_noise_gives_sample_mean() {
        let m = ExponentialClamped::new(30, 1e6, 1.0).unwrap();
        let mut seed = draw_one(&m, 8, Domain::Bank, 0);
        seed.dp[0] = 0.5;
        let s = generate(&m, &[10.0], &seed).unwrap().0[0];
        let mean: f64 = seed.data.iter().map(|u| -10.0 * (1.0 - u).ln()).sum::<f64>() / 30.0;
        assert!((s - mean).abs() < 1e-9);
    }
}
