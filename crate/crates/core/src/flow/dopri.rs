//! Dormand–Prince 5(4) step with its free quartic continuous extension
//! (coefficients as in Hairer, Nørsett & Wanner's DOPRI5).

use crate::field::{Field, FieldError};
use crate::geom::Vec2;


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

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseStep {
    pub h: f64,
    pub r: [Vec2; 5],
}

impl DenseStep {
    /// State at fraction `theta` of the step.
    pub fn state(&self, theta: f64) -> Vec2 {
        let s = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = self.r;
        r1 + (r2 + (r3 + (r4 + r5 * s) * theta) * s) * theta
    }

    /// Time derivative of the interpolant at fraction `theta`.
    pub fn velocity(&self, theta: f64) -> Vec2 {
        let s = 1.0 - theta;
        let [_, r2, r3, r4, r5] = self.r;
        let dp = r2
            + r3 * (1.0 - 2.0 * theta)
            + r4 * (theta * (2.0 - 3.0 * theta))
            + r5 * (2.0 * theta * s * (1.0 - 2.0 * theta));
        dp / self.h
    }
}

pub struct StepResult {
    pub x1: Vec2,
    pub f1: Vec2,
    /// Scaled error norm; the step is acceptable when `<= 1`.
    pub err: f64,
    pub dense: DenseStep,
}

/// One trial step from `(x0, f0)` with size `h`; `f1` is the FSAL stage.
pub fn step(field: &Field, x0: Vec2, f0: Vec2, h: f64, tol: f64) -> Result<StepResult, FieldError> {
    let k1 = f0;
    let k2 = field.eval(x0 + k1 * (h * A21))?;
    let k3 = field.eval(x0 + (k1 * A31 + k2 * A32) * h)?;
    let k4 = field.eval(x0 + (k1 * A41 + k2 * A42 + k3 * A43) * h)?;
    let k5 = field.eval(x0 + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h)?;
    let k6 = field.eval(x0 + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h)?;
    let x1 = x0 + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
    let k7 = field.eval(x1)?;

    let e = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    let sx = tol * (1.0 + x0.x.abs().max(x1.x.abs()));
    let sy = tol * (1.0 + x0.y.abs().max(x1.y.abs()));
    let err = (((e.x / sx).powi(2) + (e.y / sy).powi(2)) / 2.0).sqrt();

    let ydiff = x1 - x0;
    let bspl = k1 * h - ydiff;
    let r5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
    Ok(StepResult {
        x1,
        f1: k7,
        err,
        dense: DenseStep {
            h,
            r: [x0, ydiff, bspl, ydiff - k7 * h - bspl, r5],
        },
    })
}

/// Starting step size heuristic (Hairer's `hinit`).
pub fn initial_step(field: &Field, x0: Vec2, f0: Vec2, tol: f64) -> Result<f64, FieldError> {
    let sc = |v: Vec2| tol * (1.0 + v.x.abs().max(v.y.abs()));
    let d0 = x0.norm() / sc(x0);
    let d1 = f0.norm() / sc(x0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(1.0);
    let f1 = field.eval(x0 + f0 * h0)?;
    let d2 = (f1 - f0).norm() / sc(x0) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1))
}
