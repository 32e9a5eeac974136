//! The worked example models and a registry to build them by name.

mod bernoulli;
mod exponential;
mod linreg;
mod logistic;
mod mann_whitney;
mod normal;
mod poisson;

pub use bernoulli::{BernoulliTulap, BernoulliUnknownN};
pub use exponential::ExponentialClamped;
pub use linreg::LinregSsp;
pub use logistic::LogisticObjPert;
pub use mann_whitney::{MannWhitney, MwFlavor};
pub use normal::NormalLocScale;
pub use poisson::PoissonClamped;

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::engine::Model;
use crate::error::{invalid, Result};

pub const MODEL_NAMES: [&str; 8] = [
    "bernoulli",
    "poisson",
    "normal",
    "linreg",
    "logistic",
    "exponential",
    "bernoulli-unknown-n",
    "mann-whitney",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

/// Named model settings. Every key must be consumed by the model that
/// reads them; leftovers are reported as errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    values: BTreeMap<String, ParamValue>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), ParamValue::Num(v));
        self
    }

    pub fn text(mut self, key: &str, v: &str) -> Self {
        self.values.insert(key.to_string(), ParamValue::Text(v.to_string()));
        self
    }

    pub fn insert(&mut self, key: &str, v: ParamValue) {
        self.values.insert(key.to_string(), v);
    }

    fn take_num(&mut self, key: &str) -> Result<Option<f64>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(ParamValue::Num(v)) => Ok(Some(v)),
            Some(ParamValue::Text(t)) => invalid(format!("model parameter {key} must be a number, got {t:?}")),
        }
    }

    fn get(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.take_num(key)?.unwrap_or(default))
    }

    fn get_count(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = self.get(key, default as f64)?;
        if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
            return invalid(format!("model parameter {key} must be a nonnegative integer, got {v}"));
        }
        Ok(v as usize)
    }

    fn get_text(&mut self, key: &str, default: &str) -> Result<String> {
        match self.values.remove(key) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(t)) => Ok(t),
            Some(ParamValue::Num(v)) => invalid(format!("model parameter {key} must be a string, got {v}")),
        }
    }

    fn finish(self, model: &str) -> Result<()> {
        if let Some(k) = self.values.keys().next() {
            return invalid(format!("unknown parameter {k:?} for model {model}"));
        }
        Ok(())
    }
}

/// Builds a model from its registry name and settings. Missing settings take
/// the defaults of the corresponding worked example.
pub fn build_model(name: &str, params: &ModelParams) -> Result<Arc<dyn Model>> {
    let mut p = params.clone();
    let model: Arc<dyn Model> = match name {
        "bernoulli" => Arc::new(BernoulliTulap::new(p.get_count("n", 100)?, p.get("epsilon", 1.0)?)?),
        "poisson" => Arc::new(PoissonClamped::new(
            p.get_count("n", 100)?,
            p.get_count("c", 14)?,
            p.get("epsilon", 1.0)?,
            p.get("theta_max", f64::INFINITY)?,
        )?),
        "normal" => {
            let noise = p.get_text("noise", "gaussian")?;
            let n = p.get_count("n", 100)?;
            let (l, u, eps) = (p.get("lower", 0.0)?, p.get("upper", 3.0)?, p.get("epsilon", 1.0)?);
            match noise.as_str() {
                "gaussian" => Arc::new(NormalLocScale::gaussian(n, l, u, eps)?),
                "laplace" => Arc::new(NormalLocScale::laplace(n, l, u, eps, p.get("laplace_scale", 2.0)?)?),
                other => return invalid(format!("normal noise must be gaussian or laplace, got {other:?}")),
            }
        }
        "linreg" => Arc::new(LinregSsp::new(p.get_count("n", 500)?, p.get("delta", 2.0)?, p.get("mu", 1.0)?)?),
        "logistic" => Arc::new(LogisticObjPert::new(
            p.get_count("n", 100)?,
            p.get("epsilon", 1.0)?,
            p.get("objpert_share", 0.9)?,
        )?),
        "exponential" => Arc::new(exponential_from(&mut p)?),
        "bernoulli-unknown-n" => Arc::new(BernoulliUnknownN::new(p.get("epsilon", 1.0)?, p.get("n_max", 100_000.0)?)?),
        "mann-whitney" => {
            let flavor = MwFlavor::parse(&p.get_text("flavor", "pure_dp_laplace")?)?;
            let n = p.get_count("n", 100)?;
            let eps_m = p.get("eps_m", 0.3)?;
            let eps_u = match p.take_num("eps_u")? {
                Some(v) => v,
                None => flavor.remaining_budget(1.0, eps_m)?,
            };
            let mut m = MannWhitney::new(n, eps_m, eps_u, flavor)?;
            let (a, b) = (p.take_num("alt_a")?, p.take_num("alt_b")?);
            if let (Some(a), Some(b)) = (a, b) {
                m = m.with_alternative(a, b)?;
            } else if a.is_some() || b.is_some() {
                return invalid("alt_a and alt_b must be given together");
            }
            Arc::new(m)
        }
        other => return invalid(format!("unknown model {other:?}; known models: {}", MODEL_NAMES.join(", "))),
    };
    p.finish(name)?;
    Ok(model)
}

/// The clamped-exponential model as its concrete type, for the inversion
/// baseline.
pub fn build_exponential(params: &ModelParams) -> Result<ExponentialClamped> {
    let mut p = params.clone();
    let m = exponential_from(&mut p)?;
    p.finish("exponential")?;
    Ok(m)
}

fn exponential_from(p: &mut ModelParams) -> Result<ExponentialClamped> {
    ExponentialClamped::new(p.get_count("n", 100)?, p.get("c", 20.0)?, p.get("epsilon", 1.0)?)
}

/// `#{v <= x}` in a sorted slice.
pub(crate) fn count_leq_sorted(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|&v| v <= x)
}

/// `#{v < x}` in a sorted slice.
pub(crate) fn count_lt_sorted(sorted: &[f64], x: f64) -> usize {
    sorted.partition_point(|&v| v < x)
}

pub(crate) fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Prefix sums `[0, v0, v0 + v1, ...]`.
pub(crate) fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for x in v {
        acc += x;
        out.push(acc);
    }
    out
}

pub(crate) fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        invalid(msg)
    }
}
