use crate::depth::Orientation;
use crate::error::{invalid, Error, Result};

/// Order-statistic band `T_obs in [T_(a), T_(b)]` over `R + 1` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub a: usize,
    pub b: usize,
    pub alpha: f64,
    pub r: usize,
}

// products like 0.95 * 1000 land a rounding error away from an integer
const FUZZ: f64 = 1e-9;

pub(crate) fn floor_f(x: f64) -> usize {
    (x + FUZZ).floor().max(0.0) as usize
}

pub(crate) fn ceil_f(x: f64) -> usize {
    (x - FUZZ).ceil().max(0.0) as usize
}

pub fn choose_band(alpha: f64, r: usize, side: Orientation) -> Result<Band> {
    if !(alpha < 1.0) || r == 0 {
        return invalid(format!("band needs alpha < 1 and R >= 1, got alpha = {alpha}, R = {r}"));
    }
    let m = (r + 1) as f64;
    if alpha * m < 1.0 - FUZZ {
        return Err(Error::InfeasibleBand { alpha, r });
    }
    let width = ceil_f((1.0 - alpha) * m);
    let (a, b) = match side {
        Orientation::TwoSided => {
            let a = floor_f(alpha / 2.0 * m).max(1);
            (a, (a + width - 1).min(r + 1))
        }
        Orientation::LowUnusual => (floor_f(alpha * m) + 1, r + 1),
        Orientation::HighUnusual => (1, width.max(1)),
    };
    Ok(Band { a, b, alpha, r })
}
