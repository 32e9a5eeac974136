//! Seeds, generating equations and rank computation.

mod rng;

pub use rng::{splitmix64, Domain, SeedSource, Stream};

use std::fmt;

use crate::depth::TestStatistic;
use crate::error::{invalid, numeric, Result};

/// Randomness behind one release: data seeds and mechanism seeds.
///
/// `aux` holds model-derived quantities (sorted values, prefix sums) that are
/// a deterministic function of `data` and only speed up generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub data: Vec<f64>,
    pub dp: Vec<f64>,
    pub aux: Vec<f64>,
}

impl Seed {
    pub fn new(data: Vec<f64>, dp: Vec<f64>) -> Self {
        Seed {
            data,
            dp,
            aux: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().chain(&self.dp).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedLayout {
    pub data_dims: usize,
    pub dp_dims: usize,
}

/// R seeds drawn once and reused for every candidate parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedBank {
    pub seeds: Vec<Seed>,
    pub master_seed: u64,
}

impl SeedBank {
    pub fn r(&self) -> usize {
        self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary(pub Vec<f64>);

impl Summary {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Summary {
    fn from(v: Vec<f64>) -> Self {
        Summary(v)
    }
}

/// Rectangular parameter space with an optional interest coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub interest: Option<usize>,
    pub names: Vec<String>,
    /// Coordinates restricted to integer values; searched by enumeration.
    pub integer: Vec<bool>,
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, names: &[&str]) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != names.len() || lower.is_empty() {
            return invalid("box bounds and names must have equal nonzero length");
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return invalid(format!("box coordinate {i} has lower {l} > upper {u}"));
            }
        }
        let d = lower.len();
        Ok(ParamBox {
            lower,
            upper,
            interest: None,
            names: names.iter().map(|s| s.to_string()).collect(),
            integer: vec![false; d],
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn with_interest(mut self, index: usize) -> Result<Self> {
        if index >= self.dim() {
            return invalid(format!("interest index {index} out of range"));
        }
        self.interest = Some(index);
        Ok(self)
    }

    pub fn with_integer(mut self, index: usize) -> Self {
        self.integer[index] = true;
        self
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *t >= *l && *t <= *u)
    }

    pub fn project(&self, theta: &mut [f64]) {
        for (i, t) in theta.iter_mut().enumerate() {
            *t = t.max(self.lower[i]).min(self.upper[i]);
            if self.integer[i] {
                *t = t.round().max(self.lower[i].ceil()).min(self.upper[i].floor());
            }
        }
    }

    /// Copy with coordinate `i` restricted to `[lo, hi]`.
    pub fn restrict(&self, i: usize, lo: f64, hi: f64) -> Self {
        let mut b = self.clone();
        b.lower[i] = lo.max(self.lower[i]);
        b.upper[i] = hi.min(self.upper[i]);
        b
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A generating equation `s = G(theta, u)` with its metadata.
pub trait Model: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn param_box(&self) -> &ParamBox;
    fn seed_layout(&self) -> SeedLayout;
    fn summary_dim(&self) -> usize;
    fn privacy_label(&self) -> String;

    /// Draws one seed from the model's seed distribution.
    fn draw_seed(&self, src: &SeedSource) -> Seed;

    /// Fills `seed.aux`; must be a deterministic function of the seed.
    fn prepare_seed(&self, _seed: &mut Seed) {}

    /// Writes `G(theta, seed)` into `out`. `theta` is inside the box.
    fn generate_into(&self, theta: &[f64], seed: &Seed, out: &mut [f64]) -> Result<()>;

    /// Row-major `G(theta, seed_i)` for a block of seeds.
    fn generate_bank(&self, theta: &[f64], seeds: &[Seed], out: &mut [f64]) -> Result<()> {
        let d = self.summary_dim();
        for (seed, row) in seeds.iter().zip(out.chunks_mut(d)) {
            self.generate_into(theta, seed, row)?;
        }
        Ok(())
    }

    fn default_statistic(&self) -> TestStatistic;

    /// Model-specific approximate pivot, when the model defines one.
    fn pivot_statistic(&self) -> Option<TestStatistic> {
        None
    }

    /// Plug-in estimate used to seed the optimizer.
    fn estimate(&self, _s: &Summary) -> Option<Vec<f64>> {
        None
    }

    /// Region to search given the observation; models that narrow a
    /// nuisance range from the data override this.
    fn search_box(&self, _s_obs: &Summary) -> Result<ParamBox> {
        Ok(self.param_box().clone())
    }

    /// Miscoverage already spent by `search_box`; subtract it from alpha.
    fn level_spent(&self) -> f64 {
        0.0
    }

    /// Draws the observed release. Differs from `generate` only for models
    /// that simulate data from outside the null family.
    fn simulate(&self, theta: &[f64], seed: &Seed) -> Result<Summary> {
        generate(self, theta, seed)
    }
}

fn check_theta<M: Model + ?Sized>(model: &M, theta: &[f64]) -> Result<()> {
    if !model.param_box().contains(theta) {
        return invalid(format!(
            "theta {theta:?} outside the parameter box of model {}",
            model.name()
        ));
    }
    Ok(())
}

/// Draws `r` seeds; seed `i` depends only on `(master_seed, i)`.
pub fn draw_seed_bank<M: Model + ?Sized>(model: &M, r: usize, master_seed: u64) -> Result<SeedBank> {
    if r == 0 {
        return invalid("seed bank size R must be positive");
    }
    let seeds = (0..r)
        .map(|i| draw_one(model, master_seed, Domain::Bank, i as u64))
        .collect();
    Ok(SeedBank { seeds, master_seed })
}

/// Draws a single prepared seed from the given stream family.
pub fn draw_one<M: Model + ?Sized>(model: &M, master_seed: u64, domain: Domain, index: u64) -> Seed {
    let mut seed = model.draw_seed(&SeedSource::new(master_seed, domain, index));
    model.prepare_seed(&mut seed);
    seed
}

pub fn generate<M: Model + ?Sized>(model: &M, theta: &[f64], seed: &Seed) -> Result<Summary> {
    check_theta(model, theta)?;
    let layout = model.seed_layout();
    if seed.data.len() != layout.data_dims || seed.dp.len() != layout.dp_dims {
        return invalid(format!(
            "seed layout ({}, {}) does not match model layout ({}, {})",
            seed.data.len(),
            seed.dp.len(),
            layout.data_dims,
            layout.dp_dims
        ));
    }
    let mut out = vec![0.0; model.summary_dim()];
    model.generate_into(theta, seed, &mut out)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(numeric("non-finite summary", theta));
    }
    Ok(Summary(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub t_obs: f64,
    pub t_repro: Vec<f64>,
    pub count_leq: usize,
    pub theta: Vec<f64>,
}

/// Reusable buffers for repeated rank evaluations against one bank.
pub struct Ranker<'a> {
    model: &'a dyn Model,
    statistic: &'a TestStatistic,
    bank: &'a SeedBank,
    points: Vec<f64>,
    values: Vec<f64>,
    pub evaluations: usize,
}

impl<'a> Ranker<'a> {
    pub fn new(
        model: &'a dyn Model,
        statistic: &'a TestStatistic,
        s_obs: &Summary,
        bank: &'a SeedBank,
    ) -> Result<Self> {
        let d = model.summary_dim();
        if s_obs.dim() != d {
            return invalid(format!("observed summary has dimension {}, model expects {d}", s_obs.dim()));
        }
        if bank.r() == 0 {
            return invalid("empty seed bank");
        }
        let m = bank.r() + 1;
        let mut points = vec![0.0; m * d];
        points[..d].copy_from_slice(&s_obs.0);
        Ok(Ranker {
            model,
            statistic,
            bank,
            points,
            values: vec![0.0; m],
            evaluations: 0,
        })
    }

    pub fn r(&self) -> usize {
        self.bank.r()
    }

    fn evaluate(&mut self, theta: &[f64]) -> Result<()> {
        check_theta(self.model, theta)?;
        let d = self.model.summary_dim();
        self.model.generate_bank(theta, &self.bank.seeds, &mut self.points[d..])?;
        if self.points.iter().any(|v| !v.is_finite()) {
            return Err(numeric("non-finite repro summary", theta));
        }
        self.statistic.evaluate(theta, &self.points, d, &mut self.values)?;
        self.evaluations += 1;
        Ok(())
    }

    /// `(count_leq, t_obs)` at `theta`.
    pub fn count(&mut self, theta: &[f64]) -> Result<(usize, f64)> {
        self.evaluate(theta)?;
        let t_obs = self.values[0];
        let count = self.values[1..].iter().filter(|&&t| t <= t_obs).count();
        Ok((count, t_obs))
    }

    pub fn rank(&mut self, theta: &[f64]) -> Result<RankResult> {
        let (count_leq, t_obs) = self.count(theta)?;
        Ok(RankResult {
            t_obs,
            t_repro: self.values[1..].to_vec(),
            count_leq,
            theta: theta.to_vec(),
        })
    }

    /// The repro summaries from the last evaluation, row-major, without `s_obs`.
    pub fn repro_points(&self) -> &[f64] {
        &self.points[self.model.summary_dim()..]
    }
}

pub fn rank_at(
    model: &dyn Model,
    statistic: &TestStatistic,
    theta: &[f64],
    s_obs: &Summary,
    bank: &SeedBank,
) -> Result<RankResult> {
    Ranker::new(model, statistic, s_obs, bank)?.rank(theta)
}

/// Counts `#{t_i <= t_obs}` with ties counted as less-or-equal.
pub fn count_leq(t_obs: f64, t_repro: &[f64]) -> usize {
    t_repro.iter().filter(|&&t| t <= t_obs).count()
}
