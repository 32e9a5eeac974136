//! Permutation-invariant test statistics mapped into [0, 1], low = unusual.

mod planar;

pub use planar::{halfspace_depth_2d, simplicial_depth_2d};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dist::norm_cdf;
use crate::error::{invalid, numeric, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    LowUnusual,
    HighUnusual,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthKind {
    Mahalanobis,
    Halfspace,
    Simplicial,
    Spatial,
}

impl DepthKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mahalanobis" => Ok(DepthKind::Mahalanobis),
            "halfspace" => Ok(DepthKind::Halfspace),
            "simplicial" => Ok(DepthKind::Simplicial),
            "spatial" => Ok(DepthKind::Spatial),
            other => invalid(format!("unknown depth kind '{other}'")),
        }
    }
}

/// Raw pivot values for every row of a point block.
pub trait PivotFn: Send + Sync {
    fn eval(&self, theta: &[f64], points: &[f64], d: usize, out: &mut [f64]) -> Result<()>;
}

struct PointwisePivot<F>(F);

impl<F> PivotFn for PointwisePivot<F>
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync,
{
    fn eval(&self, theta: &[f64], points: &[f64], d: usize, out: &mut [f64]) -> Result<()> {
        for (row, o) in points.chunks_exact(d).zip(out.iter_mut()) {
            *o = (self.0)(theta, row);
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum StatisticKind {
    Depth(DepthKind),
    Scalar,
    Pivot(Arc<dyn PivotFn>),
}

impl fmt::Debug for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticKind::Depth(k) => write!(f, "Depth({k:?})"),
            StatisticKind::Scalar => write!(f, "Scalar"),
            StatisticKind::Pivot(_) => write!(f, "Pivot"),
        }
    }
}

/// `T_theta(x; X)` evaluated for every `x` in the conditioning list `X`.
#[derive(Debug, Clone)]
pub struct TestStatistic {
    pub kind: StatisticKind,
    /// Which values of the statistic are unusual; decides the band.
    pub orientation: Orientation,
    /// For pivots: which tails of the raw value are unusual.
    pub pivot_side: Orientation,
    pub label: String,
}

impl TestStatistic {
    /// Fills `out[i]` with the statistic of row `i` of `points`, conditioning
    /// on all rows.
    pub fn evaluate(&self, theta: &[f64], points: &[f64], d: usize, out: &mut [f64]) -> Result<()> {
        let m = points.len() / d;
        debug_assert_eq!(out.len(), m);
        match &self.kind {
            StatisticKind::Depth(DepthKind::Mahalanobis) => mahalanobis_all(points, d, out),
            StatisticKind::Depth(DepthKind::Spatial) => {
                for i in 0..m {
                    out[i] = spatial_depth(&points[i * d..(i + 1) * d], points);
                }
                Ok(())
            }
            StatisticKind::Depth(kind) => {
                if d != 2 {
                    return invalid(format!("{kind:?} depth is implemented for d = 2 only"));
                }
                for i in 0..m {
                    let x = &points[2 * i..2 * i + 2];
                    out[i] = if *kind == DepthKind::Halfspace {
                        halfspace_depth_2d(x, points)
                    } else {
                        simplicial_depth_2d(x, points)
                    };
                }
                Ok(())
            }
            StatisticKind::Scalar => {
                for (o, s) in out.iter_mut().zip(points) {
                    *o = norm_cdf(*s);
                }
                Ok(())
            }
            StatisticKind::Pivot(f) => {
                f.eval(theta, points, d, out)?;
                for o in out.iter_mut() {
                    if !o.is_finite() {
                        return Err(numeric("non-finite pivot value", theta));
                    }
                    *o = wrap_pivot(*o, self.pivot_side);
                }
                Ok(())
            }
        }
    }
}

/// Maps a raw pivot value into [0, 1] with low values unusual.
pub fn wrap_pivot(t: f64, side: Orientation) -> f64 {
    match side {
        Orientation::TwoSided => 1.0 - (2.0 * norm_cdf(t) - 1.0).abs(),
        Orientation::LowUnusual => norm_cdf(t),
        Orientation::HighUnusual => norm_cdf(-t),
    }
}

pub fn depth_statistic(kind: DepthKind, summary_dim: usize) -> Result<TestStatistic> {
    if matches!(kind, DepthKind::Halfspace | DepthKind::Simplicial) && summary_dim != 2 {
        return invalid(format!("{kind:?} depth requires a 2-dimensional summary, got {summary_dim}"));
    }
    Ok(TestStatistic {
        kind: StatisticKind::Depth(kind),
        orientation: Orientation::LowUnusual,
        pivot_side: Orientation::LowUnusual,
        label: format!("{kind:?}").to_lowercase(),
    })
}

/// `T = Phi(s)` for scalar summaries, used with a two-sided band.
pub fn scalar_statistic(summary_dim: usize) -> Result<TestStatistic> {
    if summary_dim != 1 {
        return invalid(format!("scalar statistic requires d = 1, got {summary_dim}"));
    }
    Ok(TestStatistic {
        kind: StatisticKind::Scalar,
        orientation: Orientation::TwoSided,
        pivot_side: Orientation::TwoSided,
        label: "scalar".into(),
    })
}

/// Wraps a pointwise pivot `f(theta, s)`.
pub fn pivot_statistic<F>(f: F, side: Orientation, label: &str) -> TestStatistic
where
    F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
{
    pivot_from(Arc::new(PointwisePivot(f)), side, label)
}

pub fn pivot_from(f: Arc<dyn PivotFn>, side: Orientation, label: &str) -> TestStatistic {
    TestStatistic {
        kind: StatisticKind::Pivot(f),
        orientation: Orientation::LowUnusual,
        pivot_side: side,
        label: label.into(),
    }
}

/// Sample mean and (n-1)-denominator covariance of row-major points.
fn mean_cov(points: &[f64], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let m = points.len() / d;
    let mut mean = DVector::zeros(d);
    for row in points.chunks_exact(d) {
        for j in 0..d {
            mean[j] += row[j];
        }
    }
    mean /= m as f64;
    let mut cov = DMatrix::zeros(d, d);
    for row in points.chunks_exact(d) {
        for j in 0..d {
            let dj = row[j] - mean[j];
            for k in 0..=j {
                cov[(j, k)] += dj * (row[k] - mean[k]);
            }
        }
    }
    let denom = (m as f64 - 1.0).max(1.0);
    for j in 0..d {
        for k in 0..=j {
            cov[(j, k)] /= denom;
            cov[(k, j)] = cov[(j, k)];
        }
    }
    (mean, cov)
}

/// Cholesky factor of the covariance, with one ridge retry when the
/// condition number exceeds 1e12.
fn regularized_cholesky(mut cov: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let d = cov.nrows();
    let cond = |c: &DMatrix<f64>| {
        let ev = c.clone().symmetric_eigenvalues();
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &v| (l.min(v), h.max(v)));
        if lo <= 0.0 { f64::INFINITY } else { hi / lo }
    };
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateCovariance("non-finite covariance".into()));
    }
    if d > 1 && cond(&cov) > 1e12 || d == 1 && cov[(0, 0)] <= 0.0 {
        let ridge = 1e-10 * cov.trace() / d as f64;
        for j in 0..d {
            cov[(j, j)] += ridge;
        }
    }
    cov.cholesky()
        .ok_or_else(|| Error::DegenerateCovariance(format!("{d}x{d} covariance is singular after ridge")))
}

fn mahalanobis_all(points: &[f64], d: usize, out: &mut [f64]) -> Result<()> {
    let (mean, cov) = mean_cov(points, d);
    let chol = regularized_cholesky(cov)?;
    let l = chol.l();
    let mut z = vec![0.0; d];
    for (row, o) in points.chunks_exact(d).zip(out.iter_mut()) {
        // forward substitution L z = x - mean; quadratic form = |z|^2
        let mut q = 0.0;
        for j in 0..d {
            let mut v = row[j] - mean[j];
            for k in 0..j {
                v -= l[(j, k)] * z[k];
            }
            z[j] = v / l[(j, j)];
            q += z[j] * z[j];
        }
        *o = 1.0 / (1.0 + q);
    }
    Ok(())
}

/// `[1 + (x - mu)' S^{-1} (x - mu)]^{-1}` with the moments of `xs`.
pub fn mahalanobis_depth(x: &[f64], xs: &[f64]) -> Result<f64> {
    let d = x.len();
    if xs.len() % d != 0 || xs.len() / d < d + 1 {
        return invalid("Mahalanobis depth needs at least d + 1 points of dimension d");
    }
    let (mean, cov) = mean_cov(xs, d);
    let chol = regularized_cholesky(cov)?;
    let diff = DVector::from_iterator(d, x.iter().zip(mean.iter()).map(|(a, b)| a - b));
    let sol = chol.solve(&diff);
    Ok(1.0 / (1.0 + diff.dot(&sol)))
}

/// `1 - |mean of unit vectors (x - x_i)/|x - x_i||`, zero terms for `x_i = x`.
pub fn spatial_depth(x: &[f64], xs: &[f64]) -> f64 {
    let d = x.len();
    let m = xs.len() / d;
    let mut acc = vec![0.0; d];
    for p in xs.chunks_exact(d) {
        let norm = p.iter().zip(x).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for j in 0..d {
                acc[j] += (x[j] - p[j]) / norm;
            }
        }
    }
    let len = acc.iter().map(|v| v * v).sum::<f64>().sqrt() / m as f64;
    (1.0 - len).clamp(0.0, 1.0)
}
