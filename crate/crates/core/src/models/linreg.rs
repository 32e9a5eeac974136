use crate::depth::{depth_statistic, DepthKind, TestStatistic};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::{invalid, Result};

use super::require;

/// Simple linear regression released by sufficient statistic perturbation.
///
/// `theta = (beta1, beta0, E[X], Var(X), Var(eps))`. The release is the five
/// clamped means of `x, x^2, y, xy, y^2`, each with Gaussian noise, jointly
/// `mu`-GDP.
#[derive(Debug, Clone)]
pub struct LinregSsp {
    n: usize,
    delta: f64,
    mu: f64,
    pbox: ParamBox,
}

impl LinregSsp {
    pub fn new(n: usize, delta: f64, mu: f64) -> Result<Self> {
        require(n >= 2, "linreg model needs n >= 2")?;
        require(delta > 0.0 && delta.is_finite(), "clamping range delta must be positive")?;
        require(mu > 0.0 && mu.is_finite(), "GDP parameter mu must be positive")?;
        let pbox = ParamBox::new(
            vec![-5.0, -5.0, -5.0, 0.01, 0.01],
            vec![5.0, 5.0, 5.0, 10.0, 10.0],
            &["beta1", "beta0", "mean_x", "var_x", "var_eps"],
        )?
        .with_interest(0)?;
        Ok(LinregSsp { n, delta, mu, pbox })
    }

    /// Noise multipliers of the five releases.
    fn scales(&self) -> [f64; 5] {
        let base = self.mu / 5f64.sqrt() * self.n as f64;
        let (d, d2) = (self.delta, self.delta * self.delta);
        [2.0 * d / base, d2 / base, 2.0 * d / base, 2.0 * d2 / base, d2 / base]
    }
}

impl Model for LinregSsp {
    fn name(&self) -> &str {
        "linreg"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: 2 * self.n, dp_dims: 5 }
    }

    fn summary_dim(&self) -> usize {
        5
    }

    fn privacy_label(&self) -> String {
        format!("{}-GDP", self.mu)
    }

    // data = [z_x(n) | z_eps(n)]
    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; 2 * self.n];
        src.stream(0).fill_normal(&mut data);
        let mut dp = vec![0.0; 5];
        src.stream(1).fill_normal(&mut dp);
        Seed::new(data, dp)
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let [b1, b0, mx, vx, ve] = [theta[0], theta[1], theta[2], theta[3], theta[4]];
        if vx <= 0.0 || ve <= 0.0 {
            return invalid(format!("variances must be positive, got {vx} and {ve}"));
        }
        let (sx, se) = (vx.sqrt(), ve.sqrt());
        let (d, d2) = (self.delta, self.delta * self.delta);
        let mut acc = [0.0; 5];
        let (zx, ze) = seed.data.split_at(self.n);
        for (a, b) in zx.iter().zip(ze) {
            let x = mx + sx * a;
            let y = b0 + b1 * x + se * b;
            acc[0] += x.clamp(-d, d);
            acc[1] += (x * x).min(d2);
            acc[2] += y.clamp(-d, d);
            acc[3] += (x * y).clamp(-d2, d2);
            acc[4] += (y * y).min(d2);
        }
        let scales = self.scales();
        for k in 0..5 {
            out[k] = acc[k] / self.n as f64 + scales[k] * seed.dp[k];
        }
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 5).expect("valid dimension")
    }

    /// Method of moments on the released means.
    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        let s = &s.0;
        let b = &self.pbox;
        let vx = (s[1] - s[0] * s[0]).clamp(b.lower[3], b.upper[3]);
        let b1 = ((s[3] - s[0] * s[2]) / vx).clamp(b.lower[0], b.upper[0]);
        let b0 = (s[2] - b1 * s[0]).clamp(b.lower[1], b.upper[1]);
        let ve = (s[4] - s[2] * s[2] - b1 * b1 * vx).clamp(b.lower[4], b.upper[4]);
        Some(vec![b1, b0, s[0].clamp(b.lower[2], b.upper[2]), vx, ve])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{draw_one, generate, Domain};

    #[test]
    fn noiseless_release_is_clamped_means() {
        let m = LinregSsp::new(40, 2.0, 1.0).unwrap();
        let mut seed = draw_one(&m, 6, Domain::Bank, 0);
        seed.dp = vec![0.0; 5];
        let s = generate(&m, &[0.0, 0.0, 0.0, 1.0, 0.25], &seed).unwrap().0;
        let ybar: f64 = seed.data[40..].iter().map(|z| (0.5 * z).clamp(-2.0, 2.0)).sum::<f64>() / 40.0;
        let xybar: f64 = seed.data[..40]
            .iter()
            .zip(&seed.data[40..])
            .map(|(x, z)| (x * 0.5 * z).clamp(-4.0, 4.0))
            .sum::<f64>()
            / 40.0;
        assert!((s[2] - ybar).abs() < 1e-12);
        assert!((s[3] - xybar).abs() < 1e-12);
    }

    #[test]
    fn noise_scales() {
        let m = LinregSsp::new(100, 2.0, 1.0).unwrap();
        let sc = m.scales();
        let base = 100.0 / 5f64.sqrt();
        assert!((sc[0] - 4.0 / base).abs() < 1e-12);
        assert!((sc[3] - 8.0 / base).abs() < 1e-12);
        assert!((sc[4] - 4.0 / base).abs() < 1e-12);
    }
}
