use crate::depth::{depth_statistic, DepthKind, TestStatistic};
use crate::dist::{beta_grid_position, BetaQuantileTable};
use crate::engine::{Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::{Error, Result};
use crate::mechanisms::{hull_ball, knorm_noise, objective_perturbation, sample_linf_density, LogisticLoss, NormBall, ObjPertConfig};

use super::require;

const Q: f64 = 0.85;
const LAMBDA: f64 = 0.25;
const DELTA_INF: f64 = 2.0;
/// K-norm sensitivity of `(sum z, sum z^2)` under its own hull norm.
const DELTA_K: f64 = 1.0;

/// Logistic regression with a Beta-distributed covariate.
///
/// `x_i = 2 z_i - 1` with `z_i ~ Beta(a, b)` and `y_i ~ Bern(expit(b0 + b1 x_i))`.
/// The release is the objective perturbation estimate of `(b0, b1)` and the
/// K-norm release of `(sum z, sum z^2)`. `theta = (b0, b1, a, b)`.
#[derive(Debug, Clone)]
pub struct LogisticObjPert {
    n: usize,
    epsilon: f64,
    objpert: ObjPertConfig,
    eps_knorm: f64,
    pbox: ParamBox,
}

impl LogisticObjPert {
    /// `objpert_share` of the budget goes to the coefficients, the rest to the
    /// covariate moments.
    pub fn new(n: usize, epsilon: f64, objpert_share: f64) -> Result<Self> {
        require(n >= 2, "logistic model needs n >= 2")?;
        require(epsilon > 0.0 && epsilon.is_finite(), "epsilon must be positive")?;
        require(
            objpert_share > 0.0 && objpert_share < 1.0,
            format!("budget share must lie in (0, 1), got {objpert_share}"),
        )?;
        let objpert = ObjPertConfig {
            epsilon: objpert_share * epsilon,
            q: Q,
            lambda: LAMBDA,
            delta_inf: DELTA_INF,
            dim: 2,
        };
        objpert.validate()?;
        let pbox = ParamBox::new(vec![-10.0, -10.0, 0.05, 0.05], vec![10.0, 10.0, 10.0, 10.0], &["beta0", "beta1", "a", "b"])?
            .with_interest(1)?;
        Ok(LogisticObjPert {
            n,
            epsilon,
            objpert,
            eps_knorm: (1.0 - objpert_share) * epsilon,
            pbox,
        })
    }

    /// K-norm noise with unit rate: `Gamma(3, 1) * U`, `U` uniform on the hull.
    fn unit_knorm_noise(ball: &NormBall, src: &SeedSource) -> [f64; 2] {
        // the hull fills about 29% of its bounding box, so rejection cannot stall
        let v = knorm_noise(1.0, 1.0, ball, &mut src.stream(2)).expect("hull rejection sampler");
        [v[0], v[1]]
    }

    fn release(&self, theta: &[f64], z: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let uy = &seed.data[n..];
        let x: Vec<f64> = z.iter().map(|z| 2.0 * z - 1.0).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(uy)
            .map(|(x, u)| {
                let eta = theta[0] + theta[1] * x;
                if *u <= 1.0 / (1.0 + (-eta).exp()) { 1.0 } else { 0.0 }
            })
            .collect();
        let v = sample_linf_density(self.objpert.noise_rate(), 2, &seed.dp[..3])?;
        let loss = LogisticLoss { x: &x, y: &y };
        let beta = objective_perturbation(&loss, n, &self.objpert, None, &v, Some(&theta[..2]))
            .map_err(|e| match e {
                Error::Numeric { msg, .. } => Error::Numeric { msg, theta: theta.to_vec() },
                other => other,
            })?;
        let (s1, s2) = z.iter().fold((0.0, 0.0), |(a, b), z| (a + z, b + z * z));
        let k = DELTA_K / self.eps_knorm;
        out[0] = beta[0];
        out[1] = beta[1];
        out[2] = s1 + k * seed.dp[3];
        out[3] = s2 + k * seed.dp[4];
        Ok(())
    }

    fn covariates(&self, table: &BetaQuantileTable, seed: &Seed) -> Vec<f64> {
        if seed.aux.len() == 2 * self.n {
            seed.aux.chunks_exact(2).map(|p| table.quantile_at(p[0], p[1])).collect()
        } else {
            seed.data[..self.n].iter().map(|u| table.quantile(*u)).collect()
        }
    }
}

impl Model for LogisticObjPert {
    fn name(&self) -> &str {
        "logistic"
    }

    fn param_box(&self) -> &ParamBox {
        &self.pbox
    }

    fn seed_layout(&self) -> SeedLayout {
        SeedLayout { data_dims: 2 * self.n, dp_dims: 5 }
    }

    fn summary_dim(&self) -> usize {
        4
    }

    fn privacy_label(&self) -> String {
        format!("{}-DP", self.epsilon)
    }

    // data = [u_z(n) | u_y(n)]; dp = [3 objective perturbation seeds | unit K-norm noise(2)]
    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; 2 * self.n];
        src.stream(0).fill_uniform(&mut data);
        let mut dp = vec![0.0; 3];
        src.stream(1).fill_uniform(&mut dp);
        dp.extend(Self::unit_knorm_noise(&hull_ball(), src));
        Seed::new(data, dp)
    }

    // aux = grid position (j, w) of every u_z in the quantile table
    fn prepare_seed(&self, seed: &mut Seed) {
        seed.aux = seed.data[..self.n]
            .iter()
            .flat_map(|u| {
                let (j, w) = beta_grid_position(*u);
                [j, w]
            })
            .collect();
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        self.generate_bank(theta, std::slice::from_ref(seed), out)
    }

    fn generate_bank(&self, theta: &[f64], seeds: &[Seed], out: &mut [f64]) -> Result<()> {
        let table = BetaQuantileTable::new(theta[2], theta[3]);
        for (seed, row) in seeds.iter().zip(out.chunks_mut(4)) {
            let z = self.covariates(&table, seed);
            self.release(theta, &z, seed, row)?;
        }
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        depth_statistic(DepthKind::Mahalanobis, 4).expect("valid dimension")
    }

    /// Released coefficients and method-of-moments Beta parameters.
    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        let b = &self.pbox;
        let n = self.n as f64;
        let m1 = (s.0[2] / n).clamp(0.01, 0.99);
        let var = (s.0[3] / n - m1 * m1).clamp(1e-4, m1 * (1.0 - m1) * 0.99);
        let common = m1 * (1.0 - m1) / var - 1.0;
        Some(vec![
            s.0[0].clamp(b.lower[0], b.upper[0]),
            s.0[1].clamp(b.lower[1], b.upper[1]),
            (m1 * common).clamp(b.lower[2], b.upper[2]),
            ((1.0 - m1) * common).clamp(b.lower[3], b.upper[3]),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::gamma_quantile;
    use crate::engine::{draw_one, generate, Domain};

    #[test]
    fn median_of_symmetric_beta_maps_to_zero() {
        let t = BetaQuantileTable::new(0.5, 0.5);
        assert!((2.0 * t.quantile(0.5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prepared_and_raw_seeds_agree() {
        let m = LogisticObjPert::new(50, 1.0, 0.9).unwrap();
        for i in 0..5 {
            let prepared = draw_one(&m, 12, Domain::Bank, i);
            let raw = Seed::new(prepared.data.clone(), prepared.dp.clone());
            let theta = [0.5, 2.0, 0.5, 0.5];
            let a = generate(&m, &theta, &prepared).unwrap().0;
            let b = generate(&m, &theta, &raw).unwrap().0;
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-9, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn knorm_noise_lies_in_scaled_hull() {
        let ball = hull_ball();
        for i in 0..200 {
            let src = SeedSource::new(3, Domain::Bank, i);
            let v = LogisticObjPert::unit_knorm_noise(&ball, &src);
            let r = gamma_quantile(src.stream(2).uniform(), 3.0, 1.0);
            assert!(ball.contains(&[v[0] / r, v[1] / r]));
        }
    }
}
