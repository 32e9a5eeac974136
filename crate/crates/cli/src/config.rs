//! Experiment configuration files (JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use repro_dp_core::inference::{Method, OptimizerSpec};
use repro_dp_core::models::{ModelParams, ParamValue, MODEL_NAMES};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    #[default]
    Repro,
    BootstrapPercentile,
    BootstrapT,
    Inversion,
}

impl MethodKind {
    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Repro => "repro",
            MethodKind::BootstrapPercentile => "bootstrap_percentile",
            MethodKind::BootstrapT => "bootstrap_t",
            MethodKind::Inversion => "inversion",
        }
    }
}

/// What each replicate computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    Ci,
    Pvalue,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ParamJson {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMethod {
    NelderMead,
    QuasiNewton,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub n_starts: Option<usize>,
    pub max_evals: Option<usize>,
    pub method: Option<OptimizerMethod>,
    pub xtol: Option<f64>,
    #[serde(default)]
    pub paranoid: bool,
}

/// Null region for p-values: the model's parameter box with the named
/// coordinates pinned.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullSpec {
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
}

fn default_alpha() -> f64 {
    0.05
}
fn default_r() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-3
}
fn default_resolution() -> usize {
    20
}
fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamJson>,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default)]
    pub task: Task,
    /// `default`, `pivot`, or a depth name.
    #[serde(default)]
    pub statistic: Option<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default = "default_r")]
    pub b: usize,
    #[serde(default = "default_one")]
    pub replicates: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub true_theta: Option<Vec<f64>>,
    /// Observed release for single-shot commands; simulated at `true_theta`
    /// when absent.
    #[serde(default)]
    pub s_obs: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_resolution")]
    pub grid_resolution: usize,
    #[serde(default)]
    pub optimizer: OptimizerOverrides,
    /// Coordinates to report intervals for.
    #[serde(default)]
    pub coords: Option<Vec<usize>>,
    #[serde(default)]
    pub null: Option<NullSpec>,
    /// Early-stopping significance level for p-values.
    #[serde(default)]
    pub level: Option<f64>,
    #[serde(default)]
    pub mu_bracket: Option<(f64, f64)>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !MODEL_NAMES.contains(&self.model.as_str()) {
            return bad(format!("unknown model {:?}; known: {}", self.model, MODEL_NAMES.join(", ")));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0, 1), got {}", self.alpha));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        match self.method {
            MethodKind::Inversion if self.model != "exponential" => {
                return bad("the inversion method is only available for the exponential model".into())
            }
            MethodKind::BootstrapPercentile | MethodKind::BootstrapT | MethodKind::Inversion
                if self.task == Task::Pvalue =>
            {
                return bad(format!("method {} does not produce p-values", self.method.label()))
            }
            _ => {}
        }
        if self.task == Task::Pvalue && self.null.is_none() {
            return bad("p-value runs need a null region".into());
        }
        if let Some(l) = self.level {
            if !(l > 0.0 && l < 1.0) {
                return bad(format!("level must be in (0, 1), got {l}"));
            }
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        let mut p = ModelParams::new();
        for (k, v) in &self.params {
            let v = match v {
                ParamJson::Num(x) => ParamValue::Num(*x),
                ParamJson::Text(t) => ParamValue::Text(t.clone()),
            };
            p.insert(k, v);
        }
        p
    }

    pub fn optimizer_spec(&self, seed: u64, paranoid: bool) -> OptimizerSpec {
        let o = &self.optimizer;
        let base = OptimizerSpec::default();
        let mut spec = OptimizerSpec {
            n_starts: o.n_starts.unwrap_or(base.n_starts),
            max_evals: o.max_evals.unwrap_or(base.max_evals),
            method: match o.method {
                Some(OptimizerMethod::QuasiNewton) => Method::QuasiNewtonBox,
                Some(OptimizerMethod::NelderMead) | None => base.method,
            },
            seed,
            xtol: o.xtol.unwrap_or(base.xtol),
        };
        if paranoid || o.paranoid {
            spec = spec.paranoid();
        }
        spec
    }
}
