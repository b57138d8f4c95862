//! Dormand-Prince 5(4) with PI step-size control on dense matrix states.

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

/// Largest state dimension accepted (rows or columns of `X`).
pub const DOPRI5_MAX_DIM: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: None,
            max_steps: 1_000_000,
        }
    }
}

impl Dopri5Options {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lincomb(base: &DenseMatrix, h: f64, terms: &[(f64, &DenseMatrix)]) -> DenseMatrix {
    let mut out = base.clone();
    for (c, k) in terms {
        if *c != 0.0 {
            out.zip_apply(*k, |o, v| *o += h * c * v);
        }
    }
    out
}

fn error_norm(err: &DenseMatrix, y0: &DenseMatrix, y1: &DenseMatrix, opts: &Dopri5Options) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Starting step from the size of `f` and a second-derivative estimate.
fn initial_step(
    rhs: &dyn Fn(f64, &DenseMatrix) -> DenseMatrix,
    t0: f64,
    x0: &DenseMatrix,
    f0: &DenseMatrix,
    span: f64,
    opts: &Dopri5Options,
) -> f64 {
    let d0 = error_norm(x0, x0, x0, opts);
    let d1 = error_norm(f0, x0, x0, opts);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let x1 = lincomb(x0, h0, &[(1.0, f0)]);
    let f1 = rhs(t0 + h0, &x1);
    let d2 = error_norm(&(&f1 - f0), x0, x0, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `Ẋ = rhs(t, X)` from `t0` and returns the states at `times`
/// (increasing, all `≥ t0`). Output times are hit exactly.
pub fn dopri5_dense_at(
    rhs: &dyn Fn(f64, &DenseMatrix) -> DenseMatrix,
    x0: &DenseMatrix,
    t0: f64,
    times: &[f64],
    opts: &Dopri5Options,
) -> Result<Vec<DenseMatrix>> {
    if x0.nrows() > DOPRI5_MAX_DIM || x0.ncols() > DOPRI5_MAX_DIM {
        return Err(Error::Refused(format!(
            "dense integration is limited to {DOPRI5_MAX_DIM} rows/columns (got {:?})",
            x0.shape()
        )));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < t0) {
        return Err(Error::contract("output times must be increasing and not before t0"));
    }
    if !(opts.rtol > 0.0 && opts.atol >= 0.0) {
        return Err(Error::contract("tolerances must be positive"));
    }
    let t_last = times.last().copied().unwrap_or(t0);
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut t = t0;
    let mut x = x0.clone();
    while next < times.len() && times[next] <= t {
        out.push(x.clone());
        next += 1;
    }
    if next == times.len() {
        return Ok(out);
    }

    let mut k1 = rhs(t, &x);
    let mut h = opts
        .h0
        .unwrap_or_else(|| initial_step(rhs, t, &x, &k1, t_last - t, opts));
    let (safe, beta) = (0.9, 0.04);
    let expo1 = 0.2 - beta * 0.75;
    let (facc1, facc2) = (5.0, 0.1);
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0;

    while next < times.len() {
        if steps >= opts.max_steps {
            return Err(Error::NonConvergence {
                iterations: steps,
                residual: h,
            });
        }
        let target = times[next];
        if target - t <= 1e-14 * t.abs().max(1.0) {
            out.push(x.clone());
            next += 1;
            continue;
        }
        let mut hit = false;
        if t + h >= target - 1e-14 * target.abs().max(1.0) {
            h = target - t;
            hit = true;
        }
        if h.abs() <= 10.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { time: t, step: h });
        }
        steps += 1;

        let k2 = rhs(t + C2 * h, &lincomb(&x, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &lincomb(&x, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &lincomb(&x, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h,
            &lincomb(&x, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &lincomb(&x, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let x_new = lincomb(&x, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = rhs(t + h, &x_new);
        let err_vec = lincomb(
            &DenseMatrix::zeros(x.nrows(), x.ncols()),
            h,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let err = error_norm(&err_vec, &x, &x_new, opts);
        if !err.is_finite() {
            h *= 0.1;
            reject = true;
            continue;
        }

        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(beta) / safe).clamp(facc2, facc1);
            let mut h_new = h / fac;
            if reject {
                h_new = h_new.min(h);
            }
            facold = err.max(1e-4);
            t = if hit { target } else { t + h };
            x = x_new;
            k1 = k7;
            reject = false;
            while next < times.len() && times[next] <= t {
                out.push(x.clone());
                next += 1;
            }
            h = h_new;
        } else {
            h /= (fac11 / safe).min(facc1);
            reject = true;
        }
    }
    Ok(out)
}

/// Integrates `Ẋ = rhs(t, X)` from `t0` to `t_end`.
pub fn dopri5_dense(
    rhs: &dyn Fn(f64, &DenseMatrix) -> DenseMatrix,
    x0: &DenseMatrix,
    t0: f64,
    t_end: f64,
    opts: &Dopri5Options,
) -> Result<DenseMatrix> {
    Ok(dopri5_dense_at(rhs, x0, t0, &[t_end], opts)?.remove(0))
}
