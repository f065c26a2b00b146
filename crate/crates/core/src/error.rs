use num_complex::Complex64;
use thiserror::Error;

use crate::trajectory::TrajectoryPath;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("position {x} outside domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("probability {0} outside [0, 1]")]
    Probability(f64),

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    /// The two coupled equations require different couplings under the chosen
    /// amplitude convention.
    #[error("inconsistent dispersion: main equation needs J0 = {j0_main}, auxiliary needs J0 = {j0_aux}")]
    InconsistentDispersion {
        j0_main: Complex64,
        j0_aux: Complex64,
    },

    #[error("phase gradient undefined at node x = {x}")]
    NodeSingularity { x: f64 },

    #[error("density is not normalized: integral = {integral}")]
    NotNormalized { integral: f64 },

    #[error(
        "quadrature did not converge: estimate {estimate}, error {achieved:e} > {requested:e}"
    )]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("invalid input: {0}")]
    Input(String),

    /// Zero flux constant; the carried path holds the (constant) position.
    #[error("stationary flow (c = 0): position stays at {}", path.final_position())]
    StationaryFlow { path: TrajectoryPath },

    #[error("flux constant {c} does not point towards x = L")]
    Direction { c: f64 },

    #[error("velocity diverges at x = {x} outside the node guard")]
    FieldDivergence { x: f64 },

    #[error("ensemble too small: {n} members, need at least {min}")]
    TooFewSamples { n: usize, min: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
