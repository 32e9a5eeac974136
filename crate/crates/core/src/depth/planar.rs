//! Exact planar halfspace and simplicial depths by angular sorting.

use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Angles in [0, 2pi) of the points of `xs` that differ from `x`, sorted,
/// together with the number of points equal to `x`.
fn angles(x: &[f64], xs: &[f64]) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(xs.len() / 2);
    let mut equal = 0;
    for p in xs.chunks_exact(2) {
        let (dx, dy) = (p[0] - x[0], p[1] - x[1]);
        if dx == 0.0 && dy == 0.0 {
            equal += 1;
        } else {
            let a = dy.atan2(dx);
            out.push(if a < 0.0 { a + TWO_PI } else { a });
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    (out, equal)
}

/// Number of sorted angles in the open arc `(s, s + pi)`, `s` in [0, 2pi).
fn count_open_arc(sorted: &[f64], s: f64) -> usize {
    let e = s + PI;
    let in_range = |lo: f64, hi: f64| {
        let a = sorted.partition_point(|&v| v <= lo);
        let b = sorted.partition_point(|&v| v < hi);
        b.saturating_sub(a)
    };
    if e < TWO_PI {
        in_range(s, e)
    } else {
        in_range(s, TWO_PI) + in_range(-1.0, e - TWO_PI)
    }
}

/// Tukey depth of `x` in the planar cloud `xs` (row-major pairs): the
/// smallest fraction of points in a closed halfplane whose boundary passes
/// through `x`.
pub fn halfspace_depth_2d(x: &[f64], xs: &[f64]) -> f64 {
    let m = xs.len() / 2;
    if m == 0 {
        return 0.0;
    }
    let (a, equal) = angles(x, xs);
    if a.is_empty() {
        return 1.0;
    }
    // counts only change when an arc endpoint crosses a point; probing the
    // midpoints between consecutive events covers every generic direction
    let mut events: Vec<f64> = a
        .iter()
        .flat_map(|&v| [v, if v >= PI { v - PI } else { v + PI }])
        .collect();
    events.sort_by(|p, q| p.total_cmp(q));
    events.dedup();
    let mut best = usize::MAX;
    for i in 0..events.len() {
        let lo = events[i];
        let hi = if i + 1 < events.len() { events[i + 1] } else { events[0] + TWO_PI };
        let mut s = 0.5 * (lo + hi);
        if s >= TWO_PI {
            s -= TWO_PI;
        }
        best = best.min(count_open_arc(&a, s));
        if best == 0 {
            break;
        }
    }
    (equal + best) as f64 / m as f64
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

fn choose3(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) * (k - 2.0) / 6.0
}

/// Simplicial depth: fraction of triangles with vertices in `xs` whose
/// closed hull contains `x`.
pub fn simplicial_depth_2d(x: &[f64], xs: &[f64]) -> f64 {
    let m = xs.len() / 2;
    if m < 3 {
        return 0.0;
    }
    let (a, _) = angles(x, xs);
    let others = a.len();
    let total = choose3(m);
    let with_x_vertex = total - choose3(others);
    // a triangle of the other points misses x iff its angular span is below
    // pi; count each such triangle once from its first vertex in angular order
    let mut missing = 0.0;
    let mut j = 0usize;
    for i in 0..others {
        if j < i + 1 {
            j = i + 1;
        }
        while j < i + others {
            let aj = if j < others { a[j] } else { a[j - others] + TWO_PI };
            if aj - a[i] < PI {
                j += 1;
            } else {
                break;
            }
        }
        missing += choose2(j - i - 1);
    }
    ((with_x_vertex + choose3(others) - missing) / total).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orient(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    }

    fn brute_simplicial(x: &[f64], xs: &[f64]) -> f64 {
        let pts: Vec<&[f64]> = xs.chunks_exact(2).collect();
        let m = pts.len();
        let mut hit = 0usize;
        let mut total = 0usize;
        for i in 0..m {
            for j in i + 1..m {
                for k in j + 1..m {
                    total += 1;
                    let d1 = orient(pts[i], pts[j], x);
                    let d2 = orient(pts[j], pts[k], x);
                    let d3 = orient(pts[k], pts[i], x);
                    let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
                    let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
                    if !(neg && pos) {
                        hit += 1;
                    }
                }
            }
        }
        hit as f64 / total as f64
    }

    fn brute_halfspace(x: &[f64], xs: &[f64]) -> f64 {
        // every generic direction is within a tiny rotation of a boundary
        // line through x and some data point
        let m = xs.len() / 2;
        let mut best = usize::MAX;
        for p in xs.chunks_exact(2) {
            let base = (p[1] - x[1]).atan2(p[0] - x[0]) + PI / 2.0;
            for phi in [base + 1e-9, base - 1e-9, base + PI + 1e-9, base + PI - 1e-9, 0.3] {
                let (c, s) = (phi.cos(), phi.sin());
                let cnt = xs
                    .chunks_exact(2)
                    .filter(|q| (q[0] - x[0]) * c + (q[1] - x[1]) * s >= 0.0)
                    .count();
                best = best.min(cnt);
            }
        }
        best as f64 / m as f64
    }

    fn cloud(n: usize, seed: u64) -> Vec<f64> {
        let mut s = crate::engine::Stream::new(seed, crate::engine::Domain::Test, 0, 0);
        (0..2 * n).map(|_| s.normal()).collect()
    }

    #[test]
    fn simplicial_matches_enumeration() {
        for seed in 0..5 {
            let xs = cloud(25, seed);
            for i in 0..25 {
                let x = &xs[2 * i..2 * i + 2];
                assert!((simplicial_depth_2d(x, &xs) - brute_simplicial(x, &xs)).abs() < 1e-12);
            }
            let outside = [10.0, 10.0];
            assert_eq!(simplicial_depth_2d(&outside, &xs), 0.0);
            let inner = [0.1, -0.05];
            assert!((simplicial_depth_2d(&inner, &xs) - brute_simplicial(&inner, &xs)).abs() < 1e-12);
        }
    }

    #[test]
    fn halfspace_matches_direction_scan() {
        for seed in 0..5 {
            let xs = cloud(30, seed);
            for i in 0..30 {
                let x = &xs[2 * i..2 * i + 2];
                assert_eq!(halfspace_depth_2d(x, &xs), brute_halfspace(x, &xs));
            }
        }
    }

    #[test]
    fn halfspace_collinear_middle_point() {
        let xs = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let d = halfspace_depth_2d(&[0.0, 0.0], &xs);
        assert!((d - brute_halfspace(&[0.0, 0.0], &xs)).abs() < 1e-12);
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
    }
}
