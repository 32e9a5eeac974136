//! Set-valued inference by ranking the observed statistic among repro draws.
//!
//! Every procedure maximizes a rank objective over a region of the parameter
//! box. `accept` and the interval and grid searches use the one-sided band
//! `a = floor(alpha (R+1)) + 1`, so the statistic must be low-unusual.

mod band;
mod optimize;

pub use band::{choose_band, Band};
pub use optimize::{latin_hypercube, optimize_rank, Method, OptResult, OptimizerSpec};

use crate::depth::{Orientation, TestStatistic};
use crate::dist::norm_quantile;
use crate::engine::{Model, ParamBox, Ranker, SeedBank, Summary};
use crate::error::{invalid, Error, Result};

/// Everything that stays fixed while different regions are tested.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub model: &'a dyn Model,
    pub statistic: &'a TestStatistic,
    pub s_obs: &'a Summary,
    pub bank: &'a SeedBank,
}

impl<'a> Problem<'a> {
    pub fn new(
        model: &'a dyn Model,
        statistic: &'a TestStatistic,
        s_obs: &'a Summary,
        bank: &'a SeedBank,
    ) -> Result<Self> {
        if s_obs.dim() != model.summary_dim() {
            return invalid(format!(
                "observed summary has dimension {}, model {} expects {}",
                s_obs.dim(),
                model.name(),
                model.summary_dim()
            ));
        }
        Ok(Problem { model, statistic, s_obs, bank })
    }

    pub fn r(&self) -> usize {
        self.bank.r()
    }

    fn ranker(&self) -> Result<Ranker<'a>> {
        Ranker::new(self.model, self.statistic, self.s_obs, self.bank)
    }

    /// Point estimate used as a warm start, if the model has one.
    pub fn warm_start(&self) -> Vec<Vec<f64>> {
        self.model.estimate(self.s_obs).into_iter().collect()
    }
}

/// Outcome of an accept call, with the best point found.
#[derive(Debug, Clone, PartialEq)]
pub struct Acceptance {
    pub accepted: bool,
    /// Supremum of `count_leq + 1 + T_obs` found by the optimizer.
    pub objective: f64,
    pub theta: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
    pub alpha: f64,
    pub r: usize,
    pub tol: f64,
    pub master_seed: u64,
    pub evaluations: usize,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.upper - self.lower
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.empty && x >= self.lower && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Integer position of the cell along each axis.
    pub index: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub cells: Vec<GridCell>,
    pub bounding_box: ParamBox,
    pub resolution: usize,
    pub intervals: Vec<ConfidenceInterval>,
}

impl GridResult {
    /// Total volume of the accepted cells.
    pub fn area(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.lower.iter().zip(&c.upper).map(|(l, u)| u - l).product::<f64>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PValueResult {
    pub p: f64,
    /// Supremum of `count_leq + T_obs` found by the optimizer.
    pub m: f64,
    pub theta: Vec<f64>,
    pub early_stopped: bool,
    pub evaluations: usize,
}

fn check_alpha(alpha: f64, r: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return invalid(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    choose_band(alpha, r, Orientation::LowUnusual).map(|_| ())
}

fn check_orientation(statistic: &TestStatistic) -> Result<()> {
    if statistic.orientation != Orientation::LowUnusual {
        return invalid(format!(
            "statistic {} is not low-unusual; wrap two-sided scalars in a pivot",
            statistic.label
        ));
    }
    Ok(())
}

/// Acceptance threshold on `count_leq + 1 + T_obs`.
pub fn accept_threshold(alpha: f64, r: usize) -> Result<f64> {
    Ok(choose_band(alpha, r, Orientation::LowUnusual)?.a as f64)
}

/// Replaces infinite bounds by a finite window around `center`.
pub fn finite_window(region: &ParamBox, center: Option<&[f64]>) -> ParamBox {
    let mut b = region.clone();
    for i in 0..b.dim() {
        if b.lower[i].is_finite() && b.upper[i].is_finite() {
            continue;
        }
        let c = match center {
            Some(c) if c[i].is_finite() => c[i],
            _ if b.lower[i].is_finite() => b.lower[i],
            _ if b.upper[i].is_finite() => b.upper[i],
            _ => 0.0,
        };
        let c = c.clamp(region.lower[i], region.upper[i]);
        let w = 10.0 * c.abs().max(1.0);
        if !b.lower[i].is_finite() {
            b.lower[i] = c - w;
        }
        if !b.upper[i].is_finite() {
            b.upper[i] = c + w;
        }
    }
    b
}

fn warm_in(region: &ParamBox, warm: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut inside: Vec<Vec<f64>> = Vec::new();
    let mut outside: Vec<Vec<f64>> = Vec::new();
    for w in warm {
        if w.len() != region.dim() {
            continue;
        }
        if region.contains(w) {
            inside.push(w.clone());
        } else {
            let mut p = w.clone();
            region.project(&mut p);
            outside.push(p);
        }
    }
    inside.extend(outside);
    inside.truncate(4);
    inside
}

/// Tests whether `region` meets the confidence set at level `alpha`.
pub fn accept(
    problem: &Problem<'_>,
    region: &ParamBox,
    alpha: f64,
    opt: &OptimizerSpec,
    warm: &[Vec<f64>],
) -> Result<Acceptance> {
    check_orientation(problem.statistic)?;
    check_alpha(alpha, problem.r())?;
    let threshold = accept_threshold(alpha, problem.r())?;
    let region = finite_window(region, warm.first().map(|w| w.as_slice()));
    let mut ranker = problem.ranker()?;
    let mut objective = |theta: &[f64]| -> Result<f64> {
        let (count, t_obs) = ranker.count(theta)?;
        Ok(count as f64 + 1.0 + t_obs)
    };
    let res = optimize_rank(&mut objective, &region, opt, &warm_in(&region, warm), Some(threshold))?;
    log::trace!("accept {:?}..{:?}: M = {} ({} evals)", region.lower, region.upper, res.value, res.evaluations);
    Ok(Acceptance {
        accepted: res.value >= threshold,
        objective: res.value,
        theta: res.theta,
        evaluations: res.evaluations,
    })
}

/// Upper end of the interest coordinate for the bisection searches.
#[derive(Clone, Copy)]
enum Side {
    Lower,
    Upper,
}

const MAX_DOUBLINGS: usize = 60;

struct IntervalSearch<'p, 'a> {
    problem: &'p Problem<'a>,
    region: ParamBox,
    beta: usize,
    alpha: f64,
    opt: &'p OptimizerSpec,
    tol: f64,
    accepted: Vec<Vec<f64>>,
    evaluations: usize,
}

impl IntervalSearch<'_, '_> {
    fn test(&mut self, lo: f64, hi: f64, near: f64) -> Result<bool> {
        let sub = self.region.restrict(self.beta, lo, hi);
        // closest accepted points first
        let mut warm = self.accepted.clone();
        warm.sort_by(|a, b| (a[self.beta] - near).abs().total_cmp(&(b[self.beta] - near).abs()));
        let res = accept(self.problem, &sub, self.alpha, self.opt, &warm)?;
        self.evaluations += res.evaluations;
        if res.accepted {
            self.accepted.push(res.theta);
        }
        Ok(res.accepted)
    }

    /// Outer limit on one side, starting from the accepted value `start`.
    fn endpoint(&mut self, start: f64, side: Side) -> Result<f64> {
        let sign = match side {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        };
        let bound = match side {
            Side::Lower => self.region.lower[self.beta],
            Side::Upper => self.region.upper[self.beta],
        };
        // `inner` is known to have an accepted point at or beyond it; nothing
        // beyond `outer` was accepted.
        let (mut inner, mut outer);
        if bound.is_finite() {
            if self.test(bound, bound, bound)? {
                return Ok(bound);
            }
            inner = start;
            outer = bound;
        } else {
            let mut d = start.abs().max(1.0) * self.tol.max(1e-3).sqrt();
            inner = start;
            let mut doublings = 0;
            loop {
                let near = start + sign * d;
                let far = start + sign * 2.0 * d;
                let (lo, hi) = if sign > 0.0 { (near, far) } else { (far, near) };
                if !self.test(lo, hi, near)? {
                    outer = near;
                    break;
                }
                inner = near;
                d *= 2.0;
                doublings += 1;
                if doublings >= MAX_DOUBLINGS || !(start + sign * 2.0 * d).is_finite() {
                    return Ok(sign * f64::INFINITY);
                }
            }
        }
        while (outer - inner).abs() >= self.tol {
            let mid = 0.5 * (inner + outer);
            let (lo, hi) = if sign > 0.0 { (mid, outer) } else { (outer, mid) };
            if self.test(lo, hi, mid)? {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(outer)
    }
}

/// Confidence interval for the interest coordinate of `region`.
///
/// The result contains every accepted value of the coordinate found by the
/// search and is at most `2 tol` wider than their hull.
pub fn confidence_interval(
    problem: &Problem<'_>,
    region: &ParamBox,
    alpha: f64,
    tol: f64,
    opt: &OptimizerSpec,
) -> Result<ConfidenceInterval> {
    if !(tol.is_finite() && tol > 0.0) {
        return invalid(format!("tol must be positive and finite, got {tol}"));
    }
    check_orientation(problem.statistic)?;
    check_alpha(alpha, problem.r())?;
    let Some(beta) = region.interest else {
        return invalid("confidence_interval needs a box with an interest coordinate");
    };
    let mut out = ConfidenceInterval {
        lower: f64::NAN,
        upper: f64::NAN,
        empty: true,
        alpha,
        r: problem.r(),
        tol,
        master_seed: problem.bank.master_seed,
        evaluations: 0,
    };
    let warm = problem.warm_start();
    let first = accept(problem, region, alpha, opt, &warm)?;
    out.evaluations += first.evaluations;
    if !first.accepted {
        return Ok(out);
    }
    let start = first.theta[beta];
    let mut search = IntervalSearch {
        problem,
        region: region.clone(),
        beta,
        alpha,
        opt,
        tol,
        accepted: vec![first.theta],
        evaluations: 0,
    };
    out.lower = search.endpoint(start, Side::Lower)?;
    out.upper = search.endpoint(start, Side::Upper)?;
    out.empty = false;
    out.evaluations += search.evaluations;
    Ok(out)
}

/// Accepted cells of an `r`-per-axis grid over the product of coordinatewise
/// confidence intervals.
pub fn confidence_grid(
    problem: &Problem<'_>,
    region: &ParamBox,
    alpha: f64,
    resolution: usize,
    tol: f64,
    opt: &OptimizerSpec,
) -> Result<GridResult> {
    if resolution == 0 {
        return invalid("grid resolution must be at least 1");
    }
    let d = region.dim();
    let mut intervals = Vec::with_capacity(d);
    for i in 0..d {
        let ci = confidence_interval(problem, &region.clone().with_interest(i)?, alpha, tol, opt)?;
        if !ci.empty && !(ci.lower.is_finite() && ci.upper.is_finite()) {
            return Err(Error::UnboundedGrid { coord: i });
        }
        intervals.push(ci);
    }
    let mut bounding = region.clone();
    bounding.interest = None;
    if intervals.iter().any(|ci| ci.empty) {
        return Ok(GridResult {
            cells: vec![],
            bounding_box: bounding,
            resolution,
            intervals,
        });
    }
    for (i, ci) in intervals.iter().enumerate() {
        bounding.lower[i] = ci.lower;
        bounding.upper[i] = ci.upper;
    }
    let step: Vec<f64> = (0..d).map(|i| (bounding.upper[i] - bounding.lower[i]) / resolution as f64).collect();
    let total = resolution.pow(d as u32);
    let mut cells = Vec::new();
    let mut accepted_points: Vec<Vec<f64>> = Vec::new();
    let mut index = vec![0usize; d];
    for _ in 0..total {
        let mut cell = bounding.clone();
        for i in 0..d {
            cell.lower[i] = bounding.lower[i] + step[i] * index[i] as f64;
            cell.upper[i] = if index[i] + 1 == resolution {
                bounding.upper[i]
            } else {
                bounding.lower[i] + step[i] * (index[i] + 1) as f64
            };
        }
        let center: Vec<f64> = (0..d).map(|i| 0.5 * (cell.lower[i] + cell.upper[i])).collect();
        let mut warm: Vec<Vec<f64>> = accepted_points.iter().rev().take(2 * d + 2).cloned().collect();
        warm.sort_by(|a, b| dist2(a, &center).total_cmp(&dist2(b, &center)));
        warm.insert(0, center);
        let res = accept(problem, &cell, alpha, opt, &warm)?;
        if res.accepted {
            accepted_points.push(res.theta);
            cells.push(GridCell {
                lower: cell.lower.clone(),
                upper: cell.upper.clone(),
                index: index.clone(),
            });
        }
        for i in (0..d).rev() {
            index[i] += 1;
            if index[i] < resolution {
                break;
            }
            index[i] = 0;
        }
    }
    Ok(GridResult {
        cells,
        bounding_box: bounding,
        resolution,
        intervals,
    })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// p-value for the null hypothesis `theta in null`.
///
/// With `level` set, the search stops as soon as some point gives a p-value
/// above it.
pub fn pvalue(
    problem: &Problem<'_>,
    null: &ParamBox,
    opt: &OptimizerSpec,
    level: Option<f64>,
) -> Result<PValueResult> {
    check_orientation(problem.statistic)?;
    if null.lower.iter().zip(&null.upper).any(|(l, u)| l > u) {
        return invalid("null region is empty");
    }
    let r = problem.r();
    let m = (r + 1) as f64;
    let target = level.map(|l| band::floor_f(l * m) as f64);
    let warm = problem.warm_start();
    let region = finite_window(null, warm.first().map(|w| w.as_slice()));
    let mut ranker = problem.ranker()?;
    let mut objective = |theta: &[f64]| -> Result<f64> {
        let (count, t_obs) = ranker.count(theta)?;
        Ok(count as f64 + t_obs)
    };
    let res = optimize_rank(&mut objective, &region, opt, &warm_in(&region, &warm), target)?;
    let p = ((res.value.floor() + 1.0).min(m)) / m;
    Ok(PValueResult {
        p,
        m: res.value,
        theta: res.theta,
        early_stopped: target.is_some() && res.reached_target,
        evaluations: res.evaluations,
    })
}

/// Width inflation from a joint `(1 - alpha)` region projected onto one of
/// `d` coordinates, under a normal-mean idealization.
pub fn overcoverage_relative_width(alpha: f64, d: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || d == 0 {
        return invalid(format!("need alpha in (0, 1) and d >= 1, got {alpha}, {d}"));
    }
    let alpha_star = -((-alpha).ln_1p() / d as f64).exp_m1();
    Ok(norm_quantile(1.0 - alpha_star / 2.0) / norm_quantile(1.0 - alpha / 2.0))
}
