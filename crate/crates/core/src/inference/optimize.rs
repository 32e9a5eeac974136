//! Multi-start box-constrained maximization of rank objectives.

use crate::engine::{Domain, ParamBox, Stream};
use crate::error::{invalid, numeric, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NelderMeadBox,
    QuasiNewtonBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub n_starts: usize,
    pub max_evals: usize,
    pub method: Method,
    /// Seeds the Latin-hypercube starts.
    pub seed: u64,
    /// Simplex size, relative to the region, below which a local search stops.
    pub xtol: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec {
            n_starts: 8,
            max_evals: 400,
            method: Method::NelderMeadBox,
            seed: 0,
            xtol: 1e-4,
        }
    }
}

impl OptimizerSpec {
    /// Denser settings for the `--paranoid` mode.
    pub fn paranoid(&self) -> Self {
        OptimizerSpec {
            n_starts: self.n_starts * 4,
            max_evals: self.max_evals * 2,
            xtol: self.xtol / 10.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub reached_target: bool,
}

/// Latin-hypercube sample of `n` points in the unit cube of dimension `k`.
pub fn latin_hypercube(n: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = Stream::new(seed, Domain::Optimizer, k as u64, n as u64);
    let mut pts = vec![vec![0.0; k]; n];
    for j in 0..k {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let r = (s.next_u64() % (i as u64 + 1)) as usize;
            perm.swap(i, r);
        }
        for i in 0..n {
            pts[i][j] = (perm[i] as f64 + s.uniform()) / n as f64;
        }
    }
    pts
}

struct Search<'f> {
    f: &'f mut dyn FnMut(&[f64]) -> Result<f64>,
    evals: usize,
    best: Option<(Vec<f64>, f64)>,
    target: Option<f64>,
    last_error: Option<crate::Error>,
}

impl Search<'_> {
    fn eval(&mut self, theta: &[f64]) -> f64 {
        self.evals += 1;
        match (self.f)(theta) {
            Ok(v) if !v.is_nan() => {
                if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
                    self.best = Some((theta.to_vec(), v));
                }
                v
            }
            Ok(_) => f64::NEG_INFINITY,
            Err(e) => {
                log::debug!("objective failed at {theta:?}: {e}");
                self.last_error = Some(e);
                f64::NEG_INFINITY
            }
        }
    }

    fn done(&self) -> bool {
        match (self.target, &self.best) {
            (Some(t), Some((_, v))) => *v >= t,
            _ => false,
        }
    }
}

/// Free continuous coordinates and their scaling into the unit cube.
struct Frame {
    base: Vec<f64>,
    free: Vec<usize>,
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl Frame {
    fn to_theta(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = self.lo[k] + self.width[k] * z[k].clamp(0.0, 1.0);
        }
    }

    fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        self.free
            .iter()
            .enumerate()
            .map(|(k, &i)| ((theta[i] - self.lo[k]) / self.width[k]).clamp(0.0, 1.0))
            .collect()
    }
}

/// Maximizes `objective` over `region`, stopping early once `target` is met.
///
/// Starts are the projected `warm` points followed by `n_starts`
/// Latin-hypercube points; every start is evaluated first, then local
/// searches run from the starts in decreasing order of value. Integer
/// coordinates are enumerated exhaustively.
pub fn optimize_rank(
    objective: &mut dyn FnMut(&[f64]) -> Result<f64>,
    region: &ParamBox,
    opt: &OptimizerSpec,
    warm: &[Vec<f64>],
    target: Option<f64>,
) -> Result<OptResult> {
    if opt.n_starts == 0 {
        return invalid("optimizer needs at least one start");
    }
    if !region.is_bounded() {
        return invalid("optimizer region must have finite bounds");
    }
    let d = region.dim();
    let int_coords: Vec<usize> = (0..d).filter(|&i| region.integer[i]).collect();
    let lattice: Vec<Vec<f64>> = int_coords
        .iter()
        .map(|&i| {
            let (lo, hi) = (region.lower[i].ceil() as i64, region.upper[i].floor() as i64);
            (lo..=hi).map(|v| v as f64).collect()
        })
        .collect();
    if lattice.iter().any(|l| l.is_empty()) {
        return invalid("integer coordinate range of the region is empty");
    }
    let mut search = Search {
        f: objective,
        evals: 0,
        best: None,
        target,
        last_error: None,
    };
    // order lattice points so that warm-start values come first
    let mut combos: Vec<Vec<f64>> = vec![vec![]];
    for vals in &lattice {
        combos = combos
            .into_iter()
            .flat_map(|c| vals.iter().map(move |v| [c.clone(), vec![*v]].concat()))
            .collect();
    }
    if let Some(w) = warm.first() {
        let key: Vec<f64> = int_coords.iter().map(|&i| w[i].round()).collect();
        if let Some(pos) = combos.iter().position(|c| *c == key) {
            let c = combos.remove(pos);
            combos.insert(0, c);
        }
    }
    for combo in combos {
        let mut sub = region.clone();
        for (k, &i) in int_coords.iter().enumerate() {
            sub.lower[i] = combo[k];
            sub.upper[i] = combo[k];
        }
        continuous_search(&mut search, &sub, opt, warm);
        if search.done() {
            break;
        }
    }
    let evaluations = search.evals;
    let reached_target = search.done();
    match search.best {
        Some((theta, value)) if value > f64::NEG_INFINITY => Ok(OptResult {
            theta,
            value,
            evaluations,
            reached_target,
        }),
        _ => {
            let msg = match search.last_error {
                Some(e) => format!("no finite objective value in region; last error: {e}"),
                None => "no finite objective value in region".to_string(),
            };
            Err(numeric(msg, &region.lower))
        }
    }
}

fn continuous_search(search: &mut Search<'_>, region: &ParamBox, opt: &OptimizerSpec, warm: &[Vec<f64>]) {
    let d = region.dim();
    let free: Vec<usize> = (0..d).filter(|&i| region.upper[i] > region.lower[i]).collect();
    let frame = Frame {
        base: region.lower.clone(),
        lo: free.iter().map(|&i| region.lower[i]).collect(),
        width: free.iter().map(|&i| region.upper[i] - region.lower[i]).collect(),
        free,
    };
    let k = frame.free.len();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for w in warm {
        if w.len() == d {
            let mut p = w.clone();
            region.project(&mut p);
            starts.push(frame.to_unit(&p));
        }
    }
    if k == 0 {
        let mut theta = vec![0.0; d];
        frame.to_theta(&[], &mut theta);
        search.eval(&theta);
        return;
    }
    starts.extend(latin_hypercube(opt.n_starts, k, opt.seed));
    let mut theta = vec![0.0; d];
    let mut scored = Vec::with_capacity(starts.len());
    for z in starts {
        frame.to_theta(&z, &mut theta);
        let v = search.eval(&theta);
        if search.done() {
            return;
        }
        scored.push((z, v));
    }
    // stable sort keeps earlier starts first among ties
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (z, v) in scored {
        if v == f64::NEG_INFINITY {
            continue;
        }
        match opt.method {
            Method::NelderMeadBox => nelder_mead(search, &frame, z, v, opt),
            Method::QuasiNewtonBox => quasi_newton(search, &frame, z, v, opt),
        }
        if search.done() {
            return;
        }
    }
}

fn nelder_mead(search: &mut Search<'_>, frame: &Frame, z0: Vec<f64>, f0: f64, opt: &OptimizerSpec) {
    let k = z0.len();
    let d = frame.base.len();
    let mut theta = vec![0.0; d];
    let mut eval = |search: &mut Search<'_>, z: &[f64]| {
        frame.to_theta(z, &mut theta);
        search.eval(&theta)
    };
    let start_evals = search.evals;
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(z0.clone(), f0)];
    for i in 0..k {
        let mut z = z0.clone();
        z[i] = if z[i] + 0.1 <= 1.0 { z[i] + 0.1 } else { z[i] - 0.1 };
        let v = eval(search, &z);
        simplex.push((z, v));
        if search.done() {
            return;
        }
    }
    let clamp01 = |z: &mut Vec<f64>| {
        for v in z.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
    };
    while search.evals - start_evals < opt.max_evals {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let diam = simplex[1..]
            .iter()
            .map(|(z, _)| z.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diam < opt.xtol {
            break;
        }
        let mut centroid = vec![0.0; k];
        for (z, _) in &simplex[..k] {
            for j in 0..k {
                centroid[j] += z[j] / k as f64;
            }
        }
        let worst = simplex[k].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut z: Vec<f64> = (0..k).map(|j| centroid[j] + t * (worst.0[j] - centroid[j])).collect();
            clamp01(&mut z);
            z
        };
        let zr = along(-1.0);
        let fr = eval(search, &zr);
        if search.done() {
            return;
        }
        if fr > simplex[0].1 {
            let ze = along(-2.0);
            let fe = eval(search, &ze);
            simplex[k] = if fe > fr { (ze, fe) } else { (zr, fr) };
        } else if fr > simplex[k - 1].1 {
            simplex[k] = (zr, fr);
        } else {
            let outside = fr > worst.1;
            let zc = along(if outside { -0.5 } else { 0.5 });
            let fc = eval(search, &zc);
            if (outside && fc >= fr) || (!outside && fc > worst.1) {
                simplex[k] = (zc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let z: Vec<f64> = item.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let f = eval(search, &z);
                    *item = (z, f);
                    if search.done() {
                        return;
                    }
                }
            }
        }
        if search.done() {
            return;
        }
    }
}

fn quasi_newton(search: &mut Search<'_>, frame: &Frame, z0: Vec<f64>, f0: f64, opt: &OptimizerSpec) {
    let k = z0.len();
    let d = frame.base.len();
    let mut theta = vec![0.0; d];
    let mut eval = |search: &mut Search<'_>, z: &[f64]| {
        frame.to_theta(z, &mut theta);
        search.eval(&theta)
    };
    let start_evals = search.evals;
    let h = 1e-6;
    let grad = |search: &mut Search<'_>, eval: &mut dyn FnMut(&mut Search<'_>, &[f64]) -> f64, z: &[f64], fz: f64| {
        (0..k)
            .map(|j| {
                let mut zp = z.to_vec();
                let step = if zp[j] + h <= 1.0 { h } else { -h };
                zp[j] += step;
                (eval(search, &zp) - fz) / step
            })
            .collect::<Vec<f64>>()
    };
    let mut z = z0;
    let mut fz = f0;
    // inverse Hessian approximation of -f
    let mut hinv: Vec<f64> = (0..k * k).map(|i| if i % (k + 1) == 0 { 0.01 } else { 0.0 }).collect();
    let mut g = grad(search, &mut eval, &z, fz);
    while search.evals - start_evals < opt.max_evals && !search.done() {
        let dir: Vec<f64> = (0..k).map(|i| (0..k).map(|j| hinv[i * k + j] * g[j]).sum()).collect();
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-8 {
            let zn: Vec<f64> = (0..k).map(|i| (z[i] + t * dir[i]).clamp(0.0, 1.0)).collect();
            let fnew = eval(search, &zn);
            if fnew > fz {
                let gn = grad(search, &mut eval, &zn, fnew);
                let s: Vec<f64> = (0..k).map(|i| zn[i] - z[i]).collect();
                // gradients of -f
                let y: Vec<f64> = (0..k).map(|i| -(gn[i] - g[i])).collect();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                if sy > 1e-14 {
                    let hy: Vec<f64> = (0..k).map(|i| (0..k).map(|j| hinv[i * k + j] * y[j]).sum()).collect();
                    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                    for i in 0..k {
                        for j in 0..k {
                            hinv[i * k + j] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                        }
                    }
                }
                let step = s.iter().map(|v| v.abs()).fold(0.0, f64::max);
                z = zn;
                fz = fnew;
                g = gn;
                moved = step >= opt.xtol;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(lo: f64, hi: f64) -> ParamBox {
        ParamBox::new(vec![lo], vec![hi], &["x"]).unwrap()
    }

    #[test]
    fn concave_maximum() {
        let mut f = |t: &[f64]| -> Result<f64> { Ok(-(t[0] - 3.0).powi(2)) };
        let r = optimize_rank(&mut f, &unit_box(0.0, 10.0), &OptimizerSpec::default(), &[], None).unwrap();
        assert!((r.theta[0] - 3.0).abs() < 1e-4, "{:?}", r);
        let qn = OptimizerSpec { method: Method::QuasiNewtonBox, ..Default::default() };
        let r = optimize_rank(&mut f, &unit_box(0.0, 10.0), &qn, &[], None).unwrap();
        assert!((r.theta[0] - 3.0).abs() < 1e-3, "{:?}", r);
    }

    #[test]
    fn constant_objective_returns_first_start() {
        let mut f = |_: &[f64]| -> Result<f64> { Ok(2.5) };
        let region = unit_box(0.0, 1.0);
        let r = optimize_rank(&mut f, &region, &OptimizerSpec::default(), &[vec![0.25]], None).unwrap();
        assert_eq!(r.value, 2.5);
        assert_eq!(r.theta, vec![0.25]);
        let r = optimize_rank(&mut f, &region, &OptimizerSpec::default(), &[], None).unwrap();
        let first = latin_hypercube(8, 1, 0)[0][0];
        assert_eq!(r.theta, vec![first]);
    }

    #[test]
    fn step_objective_never_worse_than_starts() {
        let g = |t: &[f64]| ((t[0] * 7.0).floor() + (t[1] * 3.0).sin()).abs() + 0.1 * t[0];
        let mut f = |t: &[f64]| -> Result<f64> { Ok(g(t)) };
        let region = ParamBox::new(vec![0.0, -2.0], vec![5.0, 2.0], &["a", "b"]).unwrap();
        let r = optimize_rank(&mut f, &region, &OptimizerSpec::default(), &[], None).unwrap();
        for z in latin_hypercube(8, 2, 0) {
            let t = [5.0 * z[0], -2.0 + 4.0 * z[1]];
            assert!(r.value >= g(&t));
        }
        assert!(region.contains(&r.theta));
    }

    #[test]
    fn integer_coordinates_are_enumerated() {
        let mut seen = Vec::new();
        let mut f = |t: &[f64]| -> Result<f64> {
            seen.push(t[0]);
            Ok(-(t[0] - 4.0).abs())
        };
        let region = unit_box(1.0, 9.0).with_integer(0);
        let r = optimize_rank(&mut f, &region, &OptimizerSpec::default(), &[], None).unwrap();
        assert_eq!(r.theta, vec![4.0]);
        assert!(seen.iter().all(|v| v.fract() == 0.0));
    }

    #[test]
    fn early_stop_at_target() {
        let mut calls = 0;
        let mut f = |t: &[f64]| -> Result<f64> {
            calls += 1;
            Ok(t[0])
        };
        let r = optimize_rank(&mut f, &unit_box(0.0, 1.0), &OptimizerSpec::default(), &[vec![0.9]], Some(0.5)).unwrap();
        assert!(r.reached_target);
        assert_eq!(calls, 1);
    }

    #[test]
    fn all_failures_is_numeric_error() {
        let mut f = |t: &[f64]| -> Result<f64> { Err(numeric("boom", t)) };
        assert!(optimize_rank(&mut f, &unit_box(0.0, 1.0), &OptimizerSpec::default(), &[], None).is_err());
    }
}
