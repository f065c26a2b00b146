//! Bohmian trajectories for two coupled waveguides.
//!
//! The guides carry `ψ_m ∝ cos(k₁x)e^{ik₂x}` and `ψ_a ∝ sin(k₁x)e^{ik₂x}`. Because the
//! coupled stationary system is not a single Schrödinger equation, the phase-gradient
//! velocity `(ħ/m)∂ₓφ` does not conserve the stationary densities. The velocity that
//! does is fixed by the 1D stationary continuity equation, `v = c/ρ`, with `c` matched
//! to the mean phase-gradient velocity.
//!
//! Modules:
//! - [`model`]: parameters, analytic wavefunctions, densities, dispersion relation.
//! - [`velocity`]: phase-gradient, continuity and grid-derived velocity fields.
//! - [`trajectory`]: exact flow by density inversion and an adaptive ODE integrator.
//! - [`ensemble`]: seeded sampling, propagation and KS goodness of fit.
//! - [`cli`]: configuration and subcommands of the `bohmflow` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensemble;
mod error;
pub mod interp;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod trajectory;
pub mod velocity;

pub use error::{Error, Result};
pub use model::{
    AmplitudeConvention, DensityProfile, DispersionSolution, SystemParams, WaveFunction,
    WaveguideKind,
};
pub use trajectory::{BoundaryPolicy, OdeControls, Terminal, TrajectoryPath};
pub use velocity::{FieldKind, VelocityField};
