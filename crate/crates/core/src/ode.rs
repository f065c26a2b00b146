//! Dormand–Prince 5(4) embedded Runge–Kutta step for scalar equations `y' = f(s, y)`.

use crate::Result;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights (equal to the last row of `A`, FSAL).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// `B5 - B4`.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Outcome of one trial step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub y: f64,
    /// Local error estimate (fifth minus fourth order solution).
    pub error: f64,
}

/// Stage states are passed to `f` together with the stage abscissa, so callers can
/// reject a step whose stages leave a valid region by returning an error.
pub fn dopri5_step<F>(f: &F, s: f64, y: f64, h: f64) -> Result<Step>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut k = [0.0; 7];
    for i in 0..7 {
        let yi = y + h * (0..i).map(|j| A[i][j] * k[j]).sum::<f64>();
        k[i] = f(s + C[i] * h, yi)?;
    }
    let y5 = y + h * (0..7).map(|i| B5[i] * k[i]).sum::<f64>();
    let error = h * (0..7).map(|i| E[i] * k[i]).sum::<f64>();
    Ok(Step { y: y5, error })
}

/// Scaled error norm; a step is acceptable when this is `<= 1`.
pub fn error_ratio(step: &Step, y_old: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let scale = abs_tol + rel_tol * y_old.abs().max(step.y.abs());
    step.error.abs() / scale
}

/// Step-size factor from the error ratio, clamped to `[0.2, 5]`.
pub fn step_factor(ratio: f64) -> f64 {
    if ratio == 0.0 {
        5.0
    } else {
        (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
    }
}
