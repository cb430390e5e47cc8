//! Fixed-step fifth-order Runge–Kutta integration.
//!
//! Butcher's six-stage fifth-order scheme:
//!
//! ```text
//!   0   |
//!  1/4  | 1/4
//!  1/4  | 1/8   1/8
//!  1/2  |  0   -1/2   1
//!  3/4  | 3/16   0    0    9/16
//!   1   | -3/7  2/7  12/7 -12/7  8/7
//! ------+-----------------------------------
//!       | 7/90   0  32/90 12/90 32/90  7/90
//! ```

use nalgebra::SVector;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("non-finite derivative at stage {stage}")]
    NonFiniteStage { stage: usize },
    #[error("invalid step: {0}")]
    InvalidStep(&'static str),
    #[error("integration failed at t = {time}: {source}")]
    At {
        time: f64,
        #[source]
        source: Box<IntegrateError>,
    },
}

const C: [f64; 6] = [0.0, 0.25, 0.25, 0.5, 0.75, 1.0];
const A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.125, 0.125, 0.0, 0.0, 0.0],
    [0.0, -0.5, 1.0, 0.0, 0.0],
    [3.0 / 16.0, 0.0, 0.0, 9.0 / 16.0, 0.0],
    [-3.0 / 7.0, 2.0 / 7.0, 12.0 / 7.0, -12.0 / 7.0, 8.0 / 7.0],
];
const B: [f64; 6] = [7.0 / 90.0, 0.0, 32.0 / 90.0, 12.0 / 90.0, 32.0 / 90.0, 7.0 / 90.0];

/// Right-hand side of `ṡ = f(t, s)`.
pub trait DerivativeField<const D: usize> {
    fn eval(&self, t: f64, s: &SVector<f64, D>) -> SVector<f64, D>;
}

impl<const D: usize, F> DerivativeField<D> for F
where
    F: Fn(f64, &SVector<f64, D>) -> SVector<f64, D>,
{
    #[inline]
    fn eval(&self, t: f64, s: &SVector<f64, D>) -> SVector<f64, D> {
        self(t, s)
    }
}

/// One RK5 step of size `h` from `(t, s)`.
pub fn rk5_step<const D: usize, F: DerivativeField<D> + ?Sized>(
    f: &F,
    s: &SVector<f64, D>,
    t: f64,
    h: f64,
) -> Result<SVector<f64, D>, IntegrateError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::InvalidStep("step must be positive and finite"));
    }
    let mut k = [SVector::<f64, D>::zeros(); 6];
    for stage in 0..6 {
        let mut y = *s;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                y += kj * (h * a);
            }
        }
        let d = f.eval(t + C[stage] * h, &y);
        if !d.iter().all(|v| v.is_finite()) {
            return Err(IntegrateError::NonFiniteStage { stage });
        }
        k[stage] = d;
    }
    let mut out = *s;
    for (kj, bj) in k.iter().zip(B) {
        if bj != 0.0 {
            out += kj * (h * bj);
        }
    }
    Ok(out)
}

/// Integrate from `t0` to `t1` with fixed step `h`, returning every sample
/// including both endpoints.
pub fn integrate_fixed<const D: usize, F: DerivativeField<D> + ?Sized>(
    f: &F,
    s0: &SVector<f64, D>,
    t0: f64,
    t1: f64,
    h: f64,
) -> Result<Vec<SVector<f64, D>>, IntegrateError> {
    if !(t1 > t0) {
        return Err(IntegrateError::InvalidStep("t1 must exceed t0"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(IntegrateError::InvalidStep("step must be positive and finite"));
    }
    let ratio = (t1 - t0) / h;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(IntegrateError::InvalidStep("(t1 - t0) / h is not an integer"));
    }
    let steps = steps as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(*s0);
    let mut s = *s0;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        s = rk5_step(f, &s, t, h)
            .map_err(|e| IntegrateError::At { time: t, source: Box::new(e) })?;
        out.push(s);
    }
    Ok(out)
}
