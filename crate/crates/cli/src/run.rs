//! Single-shot inference and the replicate driver.

use std::sync::Arc;

use rayon::prelude::*;

use repro_dp_core::baselines::{
    inversion_ci, location_scale_plugin, parametric_bootstrap_ci, BootstrapMethod,
};
use repro_dp_core::depth::{depth_statistic, DepthKind, TestStatistic};
use repro_dp_core::engine::{draw_one, draw_seed_bank, Domain, Model, ParamBox, Summary};
use repro_dp_core::inference::{confidence_grid, confidence_interval, pvalue, GridResult, Problem};
use repro_dp_core::models::{build_exponential, build_model, ExponentialClamped};
use repro_dp_core::{Error as CoreError, Result as CoreResult};

use crate::config::{ExperimentConfig, MethodKind, Task};
use crate::error::{CliError, CliResult};

/// One reported interval.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub coord: usize,
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
}

impl IntervalRow {
    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.upper - self.lower
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueRow {
    pub p: f64,
    pub early_stopped: bool,
}

/// A config resolved against the model registry.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Arc<dyn Model>,
    pub statistic: TestStatistic,
    exponential: Option<ExponentialClamped>,
    pub paranoid: bool,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> CliResult<Self> {
        config.validate()?;
        let params = config.model_params();
        let model = build_model(&config.model, &params)?;
        let statistic = match config.statistic.as_deref() {
            None | Some("default") => model.default_statistic(),
            Some("pivot") => model
                .pivot_statistic()
                .ok_or_else(|| CliError::Config(format!("model {} has no pivot statistic", config.model)))?,
            Some(name) => depth_statistic(DepthKind::parse(name)?, model.summary_dim())?,
        };
        let exponential = match config.method {
            MethodKind::Inversion => Some(build_exponential(&params)?),
            _ => None,
        };
        let d = model.param_box().dim();
        if let Some(t) = &config.true_theta {
            if t.len() != d {
                return Err(CliError::Config(format!("true_theta has {} entries, model has {d}", t.len())));
            }
        }
        if let Some(s) = &config.s_obs {
            if s.len() != model.summary_dim() {
                return Err(CliError::Config(format!(
                    "s_obs has {} entries, model releases {}",
                    s.len(),
                    model.summary_dim()
                )));
            }
        }
        if let Some(cs) = &config.coords {
            if cs.is_empty() || cs.iter().any(|&c| c >= d) {
                return Err(CliError::Config(format!("coords {cs:?} out of range for {d} parameters")));
            }
        }
        if let Some(null) = &config.null {
            for name in null.fixed.keys() {
                if model.param_box().index_of(name).is_none() {
                    return Err(CliError::Config(format!("null fixes unknown parameter {name:?}")));
                }
            }
        }
        Ok(Experiment {
            config,
            model,
            statistic,
            exponential,
            paranoid: false,
        })
    }

    /// Coordinates with reported intervals.
    pub fn coords(&self) -> Vec<usize> {
        if let Some(c) = &self.config.coords {
            return c.clone();
        }
        match (self.config.method, self.model.param_box().interest) {
            (MethodKind::Inversion, _) => vec![0],
            (_, Some(j)) => vec![j],
            (_, None) => (0..self.model.param_box().dim()).collect(),
        }
    }

    /// Number of Monte Carlo draws behind the method.
    pub fn draws(&self) -> usize {
        match self.config.method {
            MethodKind::Repro => self.config.r,
            MethodKind::BootstrapPercentile | MethodKind::BootstrapT => self.config.b,
            MethodKind::Inversion => 0,
        }
    }

    fn alpha(&self) -> f64 {
        self.config.alpha - self.model.level_spent()
    }

    /// The observed release: `s_obs` from the config or a draw at `true_theta`.
    pub fn observed(&self, seed: u64) -> CliResult<Summary> {
        if let Some(s) = &self.config.s_obs {
            return Ok(Summary(s.clone()));
        }
        let theta = self
            .config
            .true_theta
            .as_ref()
            .ok_or_else(|| CliError::Config("need s_obs or true_theta".into()))?;
        let obs = draw_one(self.model.as_ref(), seed, Domain::Observed, 0);
        Ok(self.model.simulate(theta, &obs)?)
    }

    pub fn intervals(&self, s_obs: &Summary, seed: u64) -> CoreResult<Vec<IntervalRow>> {
        let coords = self.coords();
        let cfg = &self.config;
        match cfg.method {
            MethodKind::Repro => {
                let bank = draw_seed_bank(self.model.as_ref(), cfg.r, seed)?;
                let problem = Problem::new(self.model.as_ref(), &self.statistic, s_obs, &bank)?;
                let sbox = self.model.search_box(s_obs)?;
                let opt = cfg.optimizer_spec(seed, self.paranoid);
                coords
                    .into_iter()
                    .map(|j| {
                        let region = sbox.clone().with_interest(j)?;
                        let ci = confidence_interval(&problem, &region, self.alpha(), cfg.tol, &opt)?;
                        Ok(IntervalRow {
                            coord: j,
                            lower: ci.lower,
                            upper: ci.upper,
                            empty: ci.empty,
                        })
                    })
                    .collect()
            }
            MethodKind::BootstrapPercentile | MethodKind::BootstrapT => {
                let method = if cfg.method == MethodKind::BootstrapT {
                    BootstrapMethod::SimplifiedT
                } else {
                    BootstrapMethod::Percentile
                };
                let model = self.model.as_ref();
                let generic = |s: &Summary| {
                    model
                        .estimate(s)
                        .ok_or_else(|| CoreError::InvalidArgument(format!("model {} has no estimator", model.name())))
                };
                let plugin = |s: &Summary| location_scale_plugin(s);
                let estimator: &dyn Fn(&Summary) -> CoreResult<Vec<f64>> =
                    if model.name() == "normal" { &plugin } else { &generic };
                let ci = parametric_bootstrap_ci(model, estimator, s_obs, cfg.b, cfg.alpha, method, seed)?;
                Ok(coords
                    .into_iter()
                    .map(|j| IntervalRow {
                        coord: j,
                        lower: ci.intervals[j].0,
                        upper: ci.intervals[j].1,
                        empty: false,
                    })
                    .collect())
            }
            MethodKind::Inversion => {
                let m = self.exponential.as_ref().expect("built for inversion");
                let bracket = cfg.mu_bracket.unwrap_or((1e-3, 100.0));
                let ci = inversion_ci(s_obs.0[0], cfg.alpha, m.n(), m.clamp_at(), m.epsilon(), bracket)?;
                Ok(vec![IntervalRow {
                    coord: 0,
                    lower: ci.lower,
                    upper: ci.upper,
                    empty: ci.empty,
                }])
            }
        }
    }

    pub fn null_region(&self, s_obs: &Summary) -> CoreResult<ParamBox> {
        let mut region = self.model.search_box(s_obs)?;
        if let Some(null) = &self.config.null {
            for (name, &v) in &null.fixed {
                let i = region.index_of(name).expect("checked in Experiment::new");
                region = region.restrict(i, v, v);
            }
        }
        Ok(region)
    }

    /// p-value over the null region. Miscoverage spent on a preliminary
    /// search box is added back.
    pub fn pvalue(&self, s_obs: &Summary, seed: u64) -> CoreResult<PValueRow> {
        let cfg = &self.config;
        let bank = draw_seed_bank(self.model.as_ref(), cfg.r, seed)?;
        let problem = Problem::new(self.model.as_ref(), &self.statistic, s_obs, &bank)?;
        let null = self.null_region(s_obs)?;
        let opt = cfg.optimizer_spec(seed, self.paranoid);
        let res = pvalue(&problem, &null, &opt, cfg.level)?;
        Ok(PValueRow {
            p: (res.p + self.model.level_spent()).min(1.0),
            early_stopped: res.early_stopped,
        })
    }

    pub fn grid(&self, s_obs: &Summary, seed: u64) -> CoreResult<GridResult> {
        let cfg = &self.config;
        let bank = draw_seed_bank(self.model.as_ref(), cfg.r, seed)?;
        let problem = Problem::new(self.model.as_ref(), &self.statistic, s_obs, &bank)?;
        let region = self.model.search_box(s_obs)?;
        let opt = cfg.optimizer_spec(seed, self.paranoid);
        confidence_grid(&problem, &region, self.alpha(), cfg.grid_resolution, cfg.tol, &opt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Intervals(Vec<IntervalRow>),
    PValue(PValueRow),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
}

/// Mean and standard error of a per-replicate quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(values: &[f64]) -> Estimate {
        let k = values.len() as f64;
        if values.is_empty() {
            return Estimate { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / k;
        let se = if values.len() < 2 || !mean.is_finite() {
            if mean.is_finite() { 0.0 } else { f64::NAN }
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        };
        Estimate { mean, se }
    }

    /// Proportion with the binomial standard error.
    pub fn proportion(hits: usize, total: usize) -> Estimate {
        let p = hits as f64 / total as f64;
        Estimate {
            mean: p,
            se: (p * (1.0 - p) / total as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordSummary {
    pub coord: usize,
    pub coverage: Estimate,
    pub width: Estimate,
    pub median_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateReport {
    pub replicates: Vec<Replicate>,
    pub coords: Vec<CoordSummary>,
    pub rejection: Option<Estimate>,
    pub failed: usize,
}

impl ReplicateReport {
    pub fn coord(&self, j: usize) -> Option<&CoordSummary> {
        self.coords.iter().find(|c| c.coord == j)
    }

    pub fn succeeded(&self) -> usize {
        self.replicates.len() - self.failed
    }

    pub fn failure_rate(&self) -> f64 {
        self.failed as f64 / self.replicates.len() as f64
    }
}

pub fn replicate_seed(master: u64, index: usize) -> u64 {
    master ^ index as u64
}

fn run_one(exp: &Experiment, index: usize) -> Replicate {
    let seed = replicate_seed(exp.config.master_seed, index);
    let outcome = (|| -> CliResult<Outcome> {
        let s = exp.observed(seed)?;
        Ok(match exp.config.task {
            Task::Ci => Outcome::Intervals(exp.intervals(&s, seed)?),
            Task::Pvalue => Outcome::PValue(exp.pvalue(&s, seed)?),
        })
    })()
    .unwrap_or_else(|e| {
        log::warn!("replicate {index} (seed {seed}) failed: {e}");
        Outcome::Failed(e.to_string())
    });
    log::debug!("replicate {index} done");
    Replicate { index, seed, outcome }
}

/// Runs every replicate, in parallel over `jobs` threads, and summarizes in
/// replicate order.
pub fn run_replicates(exp: &Experiment, jobs: usize) -> CliResult<ReplicateReport> {
    let cfg = &exp.config;
    if cfg.replicates < 2 {
        return Err(CliError::Config("replicate runs need at least 2 replicates".into()));
    }
    if cfg.true_theta.is_none() {
        return Err(CliError::Config("replicate runs need true_theta".into()));
    }
    if cfg.s_obs.is_some() {
        return Err(CliError::Config("replicate runs simulate s_obs; remove it from the config".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let replicates: Vec<Replicate> =
        pool.install(|| (0..cfg.replicates).into_par_iter().map(|i| run_one(exp, i)).collect());
    Ok(summarize(exp, replicates))
}

fn summarize(exp: &Experiment, replicates: Vec<Replicate>) -> ReplicateReport {
    let truth = exp.config.true_theta.clone().unwrap_or_default();
    let failed = replicates.iter().filter(|r| matches!(r.outcome, Outcome::Failed(_))).count();
    let mut coords = Vec::new();
    let mut rejection = None;
    match exp.config.task {
        Task::Ci => {
            for j in exp.coords() {
                let rows: Vec<&IntervalRow> = replicates
                    .iter()
                    .filter_map(|r| match &r.outcome {
                        Outcome::Intervals(v) => v.iter().find(|row| row.coord == j),
                        _ => None,
                    })
                    .collect();
                if rows.is_empty() {
                    continue;
                }
                let hits = rows.iter().filter(|r| r.contains(truth[j])).count();
                let mut widths: Vec<f64> = rows.iter().map(|r| r.width()).collect();
                let width = Estimate::of(&widths);
                widths.sort_by(f64::total_cmp);
                let k = widths.len();
                let median_width = if k % 2 == 1 { widths[k / 2] } else { 0.5 * (widths[k / 2 - 1] + widths[k / 2]) };
                coords.push(CoordSummary {
                    coord: j,
                    coverage: Estimate::proportion(hits, rows.len()),
                    width,
                    median_width,
                });
            }
        }
        Task::Pvalue => {
            let ps: Vec<f64> = replicates
                .iter()
                .filter_map(|r| match r.outcome {
                    Outcome::PValue(p) => Some(p.p),
                    _ => None,
                })
                .collect();
            if !ps.is_empty() {
                let hits = ps.iter().filter(|&&p| p <= exp.config.alpha).count();
                rejection = Some(Estimate::proportion(hits, ps.len()));
            }
        }
    }
    ReplicateReport {
        replicates,
        coords,
        rejection,
        failed,
    }
}
