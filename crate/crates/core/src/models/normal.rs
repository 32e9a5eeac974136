use crate::depth::{depth_statistic, DepthKind, TestStatistic};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::Result;
use crate::mechanisms::NoiseKind;

use super::{count_lt_sorted, count_leq_sorted, prefix_sums, require, sorted};

/// Clamped mean and variance of `x_i = sigma z_i + mu`, each with additive
/// noise scaled by `(U-L)/(n eps)` and `(U-L)^2/(n eps)`.
#[derive(Debug, Clone)]
pub struct NormalLocScale {
    n: usize,
    lower: f64,
    upper: f64,
    epsilon: f64,
    noise: NoiseKind,
    /// Multiplier on the standard noise draw.
    noise_mult: f64,
    pbox: ParamBox,
}

impl NormalLocScale {
    pub fn gaussian(n: usize, lower: f64, upper: f64, epsilon: f64) -> Result<Self> {
        Self::build(n, lower, upper, epsilon, NoiseKind::Gaussian, 1.0)
    }

    /// Laplace noise with scale `laplace_scale` in units of the sensitivity
    /// over epsilon; 2 splits the budget evenly between the two releases.
    pub fn laplace(n: usize, lower: f64, upper: f64, epsilon: f64, laplace_scale: f64) -> Result<Self> {
        require(laplace_scale > 0.0, "laplace_scale must be positive")?;
        Self::build(n, lower, upper, epsilon, NoiseKind::Laplace, laplace_scale)
    }

    fn build(n: usize, lower: f64, upper: f64, epsilon: f64, noise: NoiseKind, noise_mult: f64) -> Result<Self> {
        require(n >= 2, "normal model needs n >= 2")?;
        require(lower < upper, format!("clamping bounds need L < U, got [{lower}, {upper}]"))?;
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        Ok(NormalLocScale {
            n,
            lower,
            upper,
            epsilon,
            noise,
            noise_mult,
            pbox: ParamBox::new(vec![-10.0, 1e-8], vec![10.0, 10.0], &["mu", "sigma"])?,
        })
    }

    fn release(&self, mean: f64, var: f64, seed: &Seed, out: &mut [f64]) {
        let w = self.upper - self.lower;
        let base = self.n as f64 * self.epsilon;
        out[0] = mean + w / base * self.noise_mult * self.noise.noise(seed.dp[0]);
        out[1] = var + w * w / base * self.noise_mult * self.noise.noise(seed.dp[1]);
    }

    /// Clamped mean and (n-1)-variance from sorted z with prefix sums of z
    /// and z^2, stored in `aux` as `[sorted | sum z | sum z^2]`.
    fn moments_sorted(&self, mu: f64, sigma: f64, aux: &[f64]) -> (f64, f64) {
        let n = self.n;
        let z = &aux[..n];
        let s1 = &aux[n..2 * n + 1];
        let s2 = &aux[2 * n + 1..];
        let lo = count_leq_sorted(z, (self.lower - mu) / sigma);
        let hi = count_lt_sorted(z, (self.upper - mu) / sigma).max(lo);
        let k_mid = (hi - lo) as f64;
        let (sz, szz) = (s1[hi] - s1[lo], s2[hi] - s2[lo]);
        let (kl, ku) = (lo as f64, (n - hi) as f64);
        let sum = kl * self.lower + ku * self.upper + sigma * sz + mu * k_mid;
        let mean = sum / n as f64;
        // centered at the mean to limit cancellation
        let (dl, du, dm) = (self.lower - mean, self.upper - mean, mu - mean);
        let ss = kl * dl * dl + ku * du * du + sigma * sigma * szz + 2.0 * sigma * dm * sz + dm * dm * k_mid;
        (mean, ss.max(0.0) / (n - 1) as f64)
    }

    fn moments_direct(&self, mu: f64, sigma: f64, z: &[f64]) -> (f64, f64) {
        let x: Vec<f64> = z.iter().map(|z| (sigma * z + mu).clamp(self.lower, self.upper)).collect();
        let mean = x.iter().sum::<f64>() / self.n as f64;
        let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
        (mean, ss / (self.n - 1) as f64)
    }
}

impl Model for NormalLocScale {
    fn name(&self) -> &str {
        "normal"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: self.n, dp_dims: 2 }
    }

    fn summary_dim(&self) -> usize {
        2
    }

    fn privacy_label(&self) -> String {
        match self.noise {
            NoiseKind::Gaussian => format!("{}-GDP", self.epsilon * 2f64.sqrt()),
            NoiseKind::Laplace => format!("{}-DP", 2.0 * self.epsilon / self.noise_mult),
        }
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; self.n];
        src.stream(0).fill_normal(&mut data);
        let mut dp = vec![0.0; 2];
        match self.noise {
            NoiseKind::Gaussian => src.stream(1).fill_normal(&mut dp),
            NoiseKind::Laplace => src.stream(1).fill_uniform(&mut dp),
        }
        Seed::new(data, dp)
    }

    fn prepare_seed(&self, seed: &mut Seed) {
        let z = sorted(&seed.data);
        let sq: Vec<f64> = z.iter().map(|v| v * v).collect();
        let mut aux = z.clone();
        aux.extend(prefix_sums(&z));
        aux.extend(prefix_sums(&sq));
        seed.aux = aux;
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let (mu, sigma) = (theta[0], theta[1]);
        let (mean, var) = if seed.aux.len() == 3 * self.n + 2 {
            self.moments_sorted(mu, sigma, &seed.aux)
        } else {
            self.moments_direct(mu, sigma, &seed.data)
        };
        self.release(mean, var, seed, out);
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 2).expect("valid dimension")
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        Some(vec![
            s.0[0].clamp(self.pbox.lower[0], self.pbox.upper[0]),
            s.0[1].max(0.0).sqrt().clamp(0.05, self.pbox.upper[1]),
        ])
    }
}
