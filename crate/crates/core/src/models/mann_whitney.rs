use std::sync::Arc;

use crate::depth::{pivot_from, Orientation, PivotFn, TestStatistic};
use crate::dist::BetaQuantileTable;
use crate::engine::{generate, Model, ParamBox, Seed, SeedLayout, SeedSource, Summary};
use crate::error::{invalid, Result};
use crate::mechanisms::NoiseKind;

use super::{prefix_sums, require};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwFlavor {
    PureDpLaplace,
    GdpGaussian,
}

impl MwFlavor {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pure_dp_laplace" | "laplace" => Ok(MwFlavor::PureDpLaplace),
            "gdp_gaussian" | "gaussian" => Ok(MwFlavor::GdpGaussian),
            other => invalid(format!("unknown Mann-Whitney flavor {other:?}")),
        }
    }

    /// Budget left for `U` after spending `eps_m` on the group size; budgets
    /// add under pure DP and add in squares under GDP.
    pub fn remaining_budget(self, total: f64, eps_m: f64) -> Result<f64> {
        let rest = match self {
            MwFlavor::PureDpLaplace => total - eps_m,
            MwFlavor::GdpGaussian => (total * total - eps_m * eps_m).max(0.0).sqrt(),
        };
        if !(rest > 0.0 && eps_m > 0.0) {
            return invalid(format!("budget split eps_m = {eps_m} leaves nothing of {total}"));
        }
        Ok(rest)
    }

    fn noise(self) -> NoiseKind {
        match self {
            MwFlavor::PureDpLaplace => NoiseKind::Laplace,
            MwFlavor::GdpGaussian => NoiseKind::Gaussian,
        }
    }

    /// Variance of one standard noise draw.
    fn unit_variance(self) -> f64 {
        match self {
            MwFlavor::PureDpLaplace => 2.0,
            MwFlavor::GdpGaussian => 1.0,
        }
    }
}

/// Private Mann-Whitney release `(m~, U~)` for two groups of sizes `m` and
/// `n - m`, simulated under the null with uniform data.
#[derive(Debug, Clone)]
pub struct MannWhitney {
    n: usize,
    eps_m: f64,
    eps_u: f64,
    flavor: MwFlavor,
    /// Beta law of the second group when simulating under the alternative.
    alternative: Option<(f64, f64)>,
    pbox: ParamBox,
}

/// Ranks (1-based) of the values of `x`.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = (k + 1) as f64;
    }
    r
}

impl MannWhitney {
    pub fn new(n: usize, eps_m: f64, eps_u: f64, flavor: MwFlavor) -> Result<Self> {
        require(n >= 2, "Mann-Whitney model needs n >= 2")?;
        require(
            eps_m > 0.0 && eps_u > 0.0 && eps_m.is_finite() && eps_u.is_finite(),
            format!("budget split must be positive, got eps_m = {eps_m}, eps_u = {eps_u}"),
        )?;
        let pbox = ParamBox::new(vec![1.0], vec![(n / 2) as f64], &["m"])?
            .with_interest(0)?
            .with_integer(0);
        Ok(MannWhitney {
            n,
            eps_m,
            eps_u,
            flavor,
            alternative: None,
            pbox,
        })
    }

    pub fn with_alternative(mut self, a: f64, b: f64) -> Result<Self> {
        require(a > 0.0 && b > 0.0, "Beta parameters of the alternative must be positive")?;
        self.alternative = Some((a, b));
        Ok(self)
    }

    fn release(&self, m: f64, u1: f64, seed: &Seed, out: &mut [f64]) {
        let n = self.n as f64;
        let u = u1.min(m * (n - m) - u1);
        let kind = self.flavor.noise();
        out[0] = m + kind.noise(seed.dp[0]) / self.eps_m;
        out[1] = u + n / self.eps_u * kind.noise(seed.dp[1]);
    }

    fn group_size(theta: &[f64]) -> Result<usize> {
        let m = theta[0];
        if m.fract() != 0.0 || m < 1.0 {
            return invalid(format!("group size must be a positive integer, got {m}"));
        }
        Ok(m as usize)
    }
}

impl Model for MannWhitney {
    fn name(&self) -> &str {
        "mann-whitney"
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
        match self.flavor {
            MwFlavor::PureDpLaplace => format!("{}-DP", self.eps_m + self.eps_u),
            MwFlavor::GdpGaussian => format!("{}-GDP", self.eps_m.hypot(self.eps_u)),
        }
    }

    fn draw_seed(&self, src: &SeedSource) -> Seed {
        let mut data = vec![0.0; self.n];
        src.stream(0).fill_uniform(&mut data);
        let mut dp = vec![0.0; 2];
        match self.flavor {
            MwFlavor::PureDpLaplace => src.stream(1).fill_uniform(&mut dp),
            MwFlavor::GdpGaussian => src.stream(1).fill_normal(&mut dp),
        }
        Seed::new(data, dp)
    }

    // aux = prefix sums of the ranks
    fn prepare_seed(&self, seed: &mut Seed) {
        seed.aux = prefix_sums(&ranks(&seed.data));
    }

    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()> {
        let m = Self::group_size(theta)?;
        let rank_sum = if seed.aux.len() == self.n + 1 {
            seed.aux[m]
        } else {
            ranks(&seed.data)[..m].iter().sum()
        };
        let mf = m as f64;
        self.release(mf, rank_sum - mf * (mf + 1.0) / 2.0, seed, out);
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic {
        pivot_from(
            Arc::new(MwPivot {
                n: self.n as f64,
                half: (self.n / 2) as f64,
                var_m: self.flavor.unit_variance() / (self.eps_m * self.eps_m),
                var_u: self.flavor.unit_variance() * (self.n as f64 / self.eps_u).powi(2),
            }),
            Orientation::TwoSided,
            "rank-sum-pivot",
        )
    }

    fn pivot_statistic(&self) -> Option<TestStatistic> {
        Some(self.default_statistic())
    }

    fn estimate(&self, s: &Summary) -> Option<Vec<f64>> {
        Some(vec![s.0[0].round().clamp(self.pbox.lower[0], self.pbox.upper[0])])
    }

    /// Under an alternative the second group is drawn from `Beta(a, b)` by
    /// inverse transform of the same uniforms.
    fn simulate(&self, theta: &[f64], seed: &Seed) -> Result<Summary> {
        let Some((a, b)) = self.alternative else {
            return generate(self, theta, seed);
        };
        let m = Self::group_size(theta)?;
        if theta[0] > self.pbox.upper[0] {
            return invalid(format!("group size {m} exceeds n/2"));
        }
        let table = BetaQuantileTable::new(a, b);
        let x: Vec<f64> = seed
            .data
            .iter()
            .enumerate()
            .map(|(i, u)| if i < m { *u } else { table.quantile(*u) })
            .collect();
        let r = ranks(&x);
        let mf = m as f64;
        let u1 = r[..m].iter().sum::<f64>() - mf * (mf + 1.0) / 2.0;
        let mut out = vec![0.0; 2];
        self.release(mf, u1, seed, &mut out);
        Ok(Summary(out))
    }
}

/// Standardized `U~` with the plug-in group size, generalized from Laplace
/// to any noise law through the noise variances.
struct MwPivot {
    n: f64,
    half: f64,
    var_m: f64,
    var_u: f64,
}

impl PivotFn for MwPivot {
    fn eval(&self, _theta: &[f64], points: &[f64], _d: usize, out: &mut [f64]) -> Result<()> {
        let n = self.n;
        for (row, o) in points.chunks_exact(2).zip(out.iter_mut()) {
            let (mt, ut) = (row[0], row[1]);
            let mh = mt.max(1.0).min(self.half);
            let num = ut - (n - mt) * mt / 2.0 - self.var_m / 2.0;
            let var = mh * (n - mh) * (n + 1.0) / 12.0
                + self.var_u
                + (n - 2.0 * mh).powi(2) * self.var_m / 4.0
                + self.var_m * self.var_m / 8.0;
            *o = num / var.sqrt();
        }
        Ok(())
    }
}
