//! Comparison methods: exact inversion of the clamped-exponential release
//! distribution through its characteristic function, and the parametric
//! bootstrap (percentile and simplified-t).

pub mod quadrature;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::engine::{draw_one, generate, Domain, Model, Summary};
use crate::error::{invalid, numeric, Error, Result};
use crate::inference::ConfidenceInterval;

type Evaluator = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
type TailBound = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A characteristic function. `tail(T)` bounds `int_T^inf |phi(t)|/t dt`
/// and is what lets the inversion integral be truncated.
#[derive(Clone)]
pub struct CharFn {
    evaluator: Evaluator,
    tail: Option<TailBound>,
    label: String,
}

impl fmt::Debug for CharFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharFn").field("label", &self.label).finish()
    }
}

impl CharFn {
    pub fn new(label: impl Into<String>, evaluator: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        CharFn {
            evaluator: Arc::new(evaluator),
            tail: None,
            label: label.into(),
        }
    }

    pub fn with_tail(mut self, tail: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.tail = Some(Arc::new(tail));
        self
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        (self.evaluator)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn tail_bound(&self, t: f64) -> Option<f64> {
        self.tail.as_ref().map(|f| f(t))
    }
}

/// Envelope of `|phi_mu(w)|` for the clamped exponential; nonincreasing in `|w|`.
fn clamped_exponential_envelope(mu: f64, c: f64, w: f64) -> f64 {
    let q = (-c / mu).exp();
    (q + (1.0 + q) / (1.0 + (w * mu).powi(2)).sqrt()).min(1.0)
}

/// `[X]_0^c` for `X ~ Exp(mean mu)`:
/// `phi(t) = (1 - e^{c(it - 1/mu)})/(1 - it mu) + e^{itc - c/mu}`.
pub fn cf_clamped_exponential(mu: f64, c: f64) -> Result<CharFn> {
    if !(mu > 0.0 && mu.is_finite() && c > 0.0 && c.is_finite()) {
        return invalid(format!("clamped exponential needs mu > 0 and c > 0, got ({mu}, {c})"));
    }
    let f = move |t: f64| {
        let z = Complex64::new(-1.0 / mu, t);
        let jump = (z * c).exp();
        let body = if t == 0.0 {
            // removable singularity of the first term at t = 0
            Complex64::new(-(-c / mu).exp_m1(), 0.0)
        } else {
            (Complex64::new(1.0, 0.0) - jump) / Complex64::new(1.0, -t * mu)
        };
        body + jump
    };
    Ok(CharFn::new(format!("clamped-exponential(mu={mu}, c={c})"), f))
}

/// Laplace(0, b): `1/(1 + b^2 t^2)`.
pub fn cf_laplace(b: f64) -> Result<CharFn> {
    if !(b > 0.0 && b.is_finite()) {
        return invalid(format!("Laplace scale must be positive, got {b}"));
    }
    Ok(CharFn::new(format!("laplace(b={b})"), move |t| Complex64::new(1.0 / (1.0 + (b * t).powi(2)), 0.0))
        .with_tail(move |t| 0.5 * (1.0 / (b * t).powi(2)).ln_1p()))
}

/// Release `s = mean of n clamped exponentials + (c/(n eps)) Laplace`:
/// `phi_s(t) = phi_mu(t/n)^n / (1 + (c t/(n eps))^2)`.
pub fn cf_clamped_exponential_release(mu: f64, c: f64, n: usize, epsilon: f64) -> Result<CharFn> {
    if n == 0 || !(epsilon > 0.0) {
        return invalid("release needs n >= 1 and epsilon > 0");
    }
    let inner = cf_clamped_exponential(mu, c)?;
    let nf = n as f64;
    let k = c / (nf * epsilon);
    let n32 = u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("n = {n} too large")))?;
    let f = move |t: f64| inner.eval(t / nf).powu(n32) / (1.0 + (k * t).powi(2));
    Ok(
        CharFn::new(format!("clamped-exponential-release(mu={mu}, c={c}, n={n}, eps={epsilon})"), f).with_tail(
            move |t| clamped_exponential_envelope(mu, c, t / nf).powf(nf) * 0.5 * (1.0 / (k * t).powi(2)).ln_1p(),
        ),
    )
}

const GP_TOL: f64 = 1e-7;
const GP_MAX_PANELS: usize = 50_000;

/// `F(x) = 1/2 - (1/pi) int_0^inf Im(e^{-itx} phi(t))/t dt`, clamped to [0, 1].
/// The integral is truncated where the cf's tail bound drops below half of
/// the error budget; the remainder goes to adaptive Gauss-Kronrod panels.
pub fn gil_pelaez_cdf(x: f64, cf: &CharFn) -> Result<f64> {
    if !x.is_finite() {
        return invalid(format!("cdf argument must be finite, got {x}"));
    }
    let budget = 0.5 * GP_TOL * PI;
    let mut upper = 1.0;
    let mut doublings = 0;
    loop {
        match cf.tail_bound(upper) {
            None => return invalid(format!("characteristic function {} has no tail bound", cf.label())),
            Some(b) if b <= budget => break,
            Some(_) => {}
        }
        upper *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(numeric(format!("no truncation point for {}", cf.label()), &[x]));
        }
    }
    let mut integrand = |t: f64| {
        let v = Complex64::from_polar(1.0, -t * x) * cf.eval(t);
        v.im / t
    };
    let initial = ((upper * (x.abs() + 1.0)) / 2.0).ceil().clamp(16.0, 4096.0) as usize;
    let q = quadrature::integrate(&mut integrand, 0.0, upper, initial, budget, GP_MAX_PANELS);
    if !q.converged || !q.value.is_finite() {
        return Err(numeric(
            format!(
                "Gil-Pelaez quadrature for {} did not converge: error {:.3e} over {} panels on [0, {upper}]",
                cf.label(),
                q.error,
                q.panels
            ),
            &[x],
        ));
    }
    Ok((0.5 - q.value / PI).clamp(0.0, 1.0))
}

const INVERSION_RTOL: f64 = 1e-6;

/// Exact interval for the clamped-exponential mean: accepts `mu` when
/// `F_{s,mu}(s_obs)` lies in `[alpha/2, 1 - alpha/2]`. `F` decreases in
/// `mu`, so each limit is one bisection for a level crossing.
pub fn inversion_ci(
    s_obs: f64,
    alpha: f64,
    n: usize,
    c: f64,
    epsilon: f64,
    mu_bracket: (f64, f64),
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let (lo, hi) = mu_bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return invalid(format!("mu bracket must satisfy 0 < lo < hi < inf, got ({lo}, {hi})"));
    }
    let mut evaluations = 0;
    let mut cdf = |mu: f64| -> Result<f64> {
        evaluations += 1;
        gil_pelaez_cdf(s_obs, &cf_clamped_exponential_release(mu, c, n, epsilon)?)
    };
    let (f_lo, f_hi) = (cdf(lo)?, cdf(hi)?);
    let mut limit = |level: f64, outer_is_low: bool| -> Result<f64> {
        if !(f_lo >= level && f_hi <= level) {
            return Err(Error::Bracket(format!(
                "F(s_obs = {s_obs}) is {f_lo} at mu = {lo} and {f_hi} at mu = {hi}; no crossing of {level}"
            )));
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > INVERSION_RTOL * 0.5 * (a + b) {
            let m = 0.5 * (a + b);
            if cdf(m)? >= level {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(if outer_is_low { a } else { b })
    };
    let lower = limit(1.0 - alpha / 2.0, true)?;
    let upper = limit(alpha / 2.0, false)?;
    Ok(ConfidenceInterval {
        lower,
        upper,
        empty: false,
        alpha,
        r: 0,
        tol: INVERSION_RTOL,
        master_seed: 0,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapMethod {
    Percentile,
    SimplifiedT,
}

impl BootstrapMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "percentile" => Ok(BootstrapMethod::Percentile),
            "simplified_t" | "simplified-t" => Ok(BootstrapMethod::SimplifiedT),
            _ => invalid(format!("unknown bootstrap method '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapCi {
    /// `(lower, upper)` per coordinate of theta.
    pub intervals: Vec<(f64, f64)>,
    pub estimate: Vec<f64>,
    pub b: usize,
    pub alpha: f64,
    pub method: BootstrapMethod,
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(x: &[f64], p: f64) -> f64 {
    let h = (x.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 >= x.len() {
        return x[x.len() - 1];
    }
    x[i] + (h - i as f64) * (x[i + 1] - x[i])
}

/// Plug-in estimate `(s1, sqrt(max(s2, 0)))` for the location-scale release.
pub fn location_scale_plugin(s: &Summary) -> Result<Vec<f64>> {
    if s.dim() != 2 {
        return invalid(format!("location-scale estimate needs a 2-dimensional summary, got {}", s.dim()));
    }
    Ok(vec![s.0[0], s.0[1].max(0.0).sqrt()])
}

/// Simulates `b` releases at the projected plug-in estimate, re-estimates on
/// each, and reads per-coordinate quantiles of the estimates (percentile)
/// or of their reflections `2 theta_hat - theta_b` (simplified-t).
pub fn parametric_bootstrap_ci(
    model: &dyn Model,
    estimator: &dyn Fn(&Summary) -> Result<Vec<f64>>,
    s_obs: &Summary,
    b: usize,
    alpha: f64,
    method: BootstrapMethod,
    master_seed: u64,
) -> Result<BootstrapCi> {
    if b < 2 {
        return invalid(format!("bootstrap needs B >= 2, got {b}"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must be in (0, 1), got {alpha}"));
    }
    let theta_hat = estimator(s_obs)?;
    if theta_hat.iter().any(|v| !v.is_finite()) {
        return Err(numeric("non-finite estimate on the observed summary", &theta_hat));
    }
    let d = model.param_box().dim();
    if theta_hat.len() != d {
        return invalid(format!("estimator returned {} coordinates, model has {d}", theta_hat.len()));
    }
    let mut at = theta_hat.clone();
    model.param_box().project(&mut at);
    let mut draws = vec![Vec::with_capacity(b); d];
    for i in 0..b {
        let seed = draw_one(model, master_seed, Domain::Bootstrap, i as u64);
        let est = estimator(&generate(model, &at, &seed)?)?;
        if est.len() != d || est.iter().any(|v| !v.is_finite()) {
            return Err(numeric(format!("non-finite bootstrap estimate in draw {i}"), &at));
        }
        for (j, v) in est.into_iter().enumerate() {
            draws[j].push(match method {
                BootstrapMethod::Percentile => v,
                BootstrapMethod::SimplifiedT => 2.0 * theta_hat[j] - v,
            });
        }
    }
    let intervals = draws
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            (quantile_sorted(&v, alpha / 2.0), quantile_sorted(&v, 1.0 - alpha / 2.0))
        })
        .collect();
    Ok(BootstrapCi {
        intervals,
        estimate: theta_hat,
        b,
        alpha,
        method,
    })
}
