use crate::error::{invalid, numeric, Result};

/// Settings of ell-infinity objective perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjPertConfig {
    pub epsilon: f64,
    pub q: f64,
    /// Upper bound on the Hessian eigenvalues of the loss.
    pub lambda: f64,
    /// Bound on the ell-infinity range of the loss gradient.
    pub delta_inf: f64,
    pub dim: usize,
}

impl ObjPertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.lambda > 0.0 && self.delta_inf > 0.0 && self.dim > 0) {
            return invalid("objective perturbation settings must be positive");
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return invalid("objective perturbation split q must lie in (0, 1)");
        }
        Ok(())
    }

    /// Ridge weight `lambda / (exp(epsilon (1 - q)) - 1)`.
    pub fn gamma(&self) -> f64 {
        self.lambda / (self.epsilon * (1.0 - self.q)).exp_m1()
    }

    /// Rate `c` of the linear noise density `exp(-c |V|_inf)`.
    pub fn noise_rate(&self) -> f64 {
        self.epsilon * self.q / self.delta_inf
    }
}

/// A twice differentiable convex function: returns its value and writes the
/// gradient and the row-major Hessian.
pub trait SmoothLoss {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

/// Average logistic loss for an intercept and one covariate.
pub struct LogisticLoss<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
}

impl SmoothLoss for LogisticLoss<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = self.x.len() as f64;
        let (mut f, mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in self.x.iter().zip(self.y) {
            let eta = theta[0] + theta[1] * x;
            // log(1 + e^eta) and expit(eta) from one exponential, without overflow
            let e = (-eta.abs()).exp();
            let softplus = eta.max(0.0) + e.ln_1p();
            let p = if eta > 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
            f += softplus - y * eta;
            let r = p - y;
            g0 += r;
            g1 += r * x;
            let w = p * (1.0 - p);
            h00 += w;
            h01 += w * x;
            h11 += w * x * x;
        }
        grad[0] = g0 / n;
        grad[1] = g1 / n;
        hess[0] = h00 / n;
        hess[1] = h01 / n;
        hess[2] = h01 / n;
        hess[3] = h11 / n;
        f / n
    }
}

/// Solves `H x = b` for symmetric positive definite `H` in place.
fn cholesky_solve(h: &mut [f64], b: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut s = h[j * d + j];
        for k in 0..j {
            s -= h[j * d + k] * h[j * d + k];
        }
        if !(s > 0.0) {
            return false;
        }
        let l = s.sqrt();
        h[j * d + j] = l;
        for i in j + 1..d {
            let mut t = h[i * d + j];
            for k in 0..j {
                t -= h[i * d + k] * h[j * d + k];
            }
            h[i * d + j] = t / l;
        }
    }
    for i in 0..d {
        let mut t = b[i];
        for k in 0..i {
            t -= h[i * d + k] * b[k];
        }
        b[i] = t / h[i * d + i];
    }
    for i in (0..d).rev() {
        let mut t = b[i];
        for k in i + 1..d {
            t -= h[k * d + i] * b[k];
        }
        b[i] = t / h[i * d + i];
    }
    true
}

/// Minimizes `L(theta) + r(theta)/n + (gamma/2n)|theta|^2 + V'theta/n` by
/// damped Newton steps, falling back to gradient steps when the Hessian is
/// not positive definite. Stops when the gradient norm is below 1e-8.
pub fn objective_perturbation(
    loss: &dyn SmoothLoss,
    n: usize,
    cfg: &ObjPertConfig,
    regularizer: Option<&dyn SmoothLoss>,
    v: &[f64],
    start: Option<&[f64]>,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let d = loss.dim();
    if v.len() != d || cfg.dim != d {
        return invalid("noise vector, loss and config dimensions differ");
    }
    let nf = n as f64;
    let gamma = cfg.gamma();
    let mut g = vec![0.0; d];
    let mut h = vec![0.0; d * d];
    let mut gr = vec![0.0; d];
    let mut hr = vec![0.0; d * d];
    let objective = |theta: &[f64], g: &mut [f64], h: &mut [f64], gr: &mut [f64], hr: &mut [f64]| -> f64 {
        let mut f = loss.eval(theta, g, h);
        if let Some(reg) = regularizer {
            f += reg.eval(theta, gr, hr) / nf;
            for i in 0..d {
                g[i] += gr[i] / nf;
            }
            for i in 0..d * d {
                h[i] += hr[i] / nf;
            }
        }
        for i in 0..d {
            f += 0.5 * gamma / nf * theta[i] * theta[i] + v[i] * theta[i] / nf;
            g[i] += gamma / nf * theta[i] + v[i] / nf;
            h[i * d + i] += gamma / nf;
        }
        f
    };
    let mut theta = start.map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; d]);
    let mut f = objective(&theta, &mut g, &mut h, &mut gr, &mut hr);
    let mut step = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let (mut tg, mut th) = (vec![0.0; d], vec![0.0; d * d]);
    for _ in 0..500 {
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < 1e-8 {
            return Ok(theta);
        }
        step.copy_from_slice(&g);
        let mut hc = h.clone();
        if !cholesky_solve(&mut hc, &mut step, d) {
            step.copy_from_slice(&g);
        }
        let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
        let mut t = 1.0;
        loop {
            for i in 0..d {
                trial[i] = theta[i] - t * step[i];
            }
            let ft = objective(&trial, &mut tg, &mut th, &mut gr, &mut hr);
            if ft <= f - 1e-4 * t * slope || t < 1e-12 {
                theta.copy_from_slice(&trial);
                f = ft;
                g.copy_from_slice(&tg);
                h.copy_from_slice(&th);
                break;
            }
            t *= 0.5;
        }
        if !f.is_finite() {
            break;
        }
    }
    let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gnorm < 1e-6 {
        return Ok(theta);
    }
    Err(numeric(format!("objective perturbation did not converge (gradient norm {gnorm:.3e})"), &theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl SmoothLoss for Quadratic {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, theta: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
            grad.copy_from_slice(theta);
            hess.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            0.5 * (theta[0] * theta[0] + theta[1] * theta[1])
        }
    }

    fn cfg() -> ObjPertConfig {
        ObjPertConfig { epsilon: 1.0, q: 0.85, lambda: 0.25, delta_inf: 2.0, dim: 2 }
    }

    #[test]
    fn gamma_value() {
        assert!((cfg().gamma() - 0.25 / (0.15f64.exp() - 1.0)).abs() < 1e-15);
        assert!((cfg().gamma() - 1.5448).abs() < 1e-4);
    }

    #[test]
    fn symmetric_objective_has_zero_minimizer() {
        let th = objective_perturbation(&Quadratic, 10, &cfg(), None, &[0.0, 0.0], Some(&[1.0, -2.0])).unwrap();
        assert!(th.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn logistic_first_order_condition() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0) * 2.0 - 1.0).collect();
        let y: Vec<f64> = (0..50).map(|i| if (i * 7) % 5 < 3 { 1.0 } else { 0.0 }).collect();
        let loss = LogisticLoss { x: &x, y: &y };
        let v = [0.7, -1.3];
        let c = cfg();
        let th = objective_perturbation(&loss, 50, &c, None, &v, None).unwrap();
        let (mut g, mut h) = ([0.0; 2], [0.0; 4]);
        loss.eval(&th, &mut g, &mut h);
        let n = 50.0;
        let full: Vec<f64> = (0..2).map(|i| g[i] + c.gamma() / n * th[i] + v[i] / n).collect();
        assert!(full.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
    }
}
