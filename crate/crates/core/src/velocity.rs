//! Velocity laws for the guide densities.
//!
//! - [`FieldKind::PhaseGradient`]: `(ħ/m)∂ₓφ`, evaluated as current over density.
//! - [`FieldKind::Continuity`]: `c/ρ(x)`, the only stationary solutions of `∂ₓ(ρv) = 0`.
//! - [`FieldKind::GridDerived`]: `c/ρ̃(x)` with `ρ̃` a monotone cubic through sampled densities.
//!
//! At an exact density node `c/ρ` has no finite value; evaluation returns `±∞` (sign of
//! `c`) as the divergence marker. Integrators never sample exact nodes.

use serde::{Deserialize, Serialize};

use crate::interp::Pchip;
use crate::model::{DensityProfile, SystemParams, WaveFunction};
use crate::quadrature::{self, DEFAULT_ABS_TOL};
use crate::{Error, Result};

/// Default central-difference step as a fraction of L.
pub const DEFAULT_DIFF_STEP: f64 = 1e-4;

/// Tolerance on `∫ρ = 1` when a normalized profile is required.
const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    PhaseGradient,
    Continuity,
    GridDerived,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VelocityField {
    PhaseGradient(WaveFunction),
    Continuity { profile: DensityProfile, flux: f64 },
    GridDerived { density: Pchip, flux: f64 },
}

/// `c/ρ`, with `±∞` at exact nodes and `0` for vanishing flux.
fn flux_over_density(c: f64, rho: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else if rho == 0.0 {
        f64::INFINITY.copysign(c)
    } else {
        c / rho
    }
}

/// `(ħ/m) Im(ψ*ψ′)/|ψ|²`; at a node of ψ the removable singularity is filled by its
/// limit `ħk₂/m`. A wavefunction that vanishes identically has no phase.
pub fn phase_gradient_velocity(wf: &WaveFunction, x: f64) -> Result<f64> {
    wf.params.check_domain(x)?;
    if wf.is_zero() {
        return Err(Error::NodeSingularity { x });
    }
    let p = &wf.params;
    let (t, _) = wf.trig_parts(x);
    let rho = wf.amplitude.norm_sqr() * t * t;
    if rho == 0.0 {
        return Ok(p.plane_wave_velocity());
    }
    Ok(p.hbar / p.mass * wf.current(x)? / rho)
}

/// Flux constant `c` such that `∫ρ·(c/ρ) = cL` equals `∫ρ·(ħ/m)∂ₓφ`.
pub fn fit_flux_constant(profile: &DensityProfile, wf: &WaveFunction) -> Result<f64> {
    fit_flux_constant_with(profile, wf, DEFAULT_ABS_TOL)
}

pub fn fit_flux_constant_with(
    profile: &DensityProfile,
    wf: &WaveFunction,
    abs_tol: f64,
) -> Result<f64> {
    let total = profile.total();
    if !profile.is_normalized(NORMALIZATION_TOL) {
        return Err(Error::NotNormalized { integral: total });
    }
    let l = profile.length();
    let mean = quadrature::integrate(
        |x| Ok(profile.density(x) * phase_gradient_velocity(wf, x)?),
        0.0,
        l,
        abs_tol,
    )?;
    Ok(mean.value / l)
}

/// `c/ρ(x)`; `±∞` at an exact node.
pub fn continuity_velocity(profile: &DensityProfile, c: f64, x: f64) -> Result<f64> {
    profile.params.check_domain(x)?;
    Ok(flux_over_density(c, profile.density(x)))
}

/// Builds a `v = c/ρ̃` field from a sampled density table.
///
/// `c` is chosen so that the trapezoid estimate of `∫ρv` equals `mean_velocity_target`;
/// since `ρv ≡ c`, that is `c = target / (x_last - x_first)`.
pub fn grid_velocity_from_density(
    samples: &[(f64, f64)],
    mean_velocity_target: f64,
) -> Result<VelocityField> {
    if samples.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 density samples, got {}",
            samples.len()
        )));
    }
    if samples[0].0 < 0.0 {
        return Err(Error::Input("positions must lie in [0, L]".into()));
    }
    if let Some((x, r)) = samples.iter().find(|(_, r)| !(*r >= 0.0)) {
        return Err(Error::Input(format!("negative density {r} at x = {x}")));
    }
    if !mean_velocity_target.is_finite() {
        return Err(Error::Input("mean velocity target must be finite".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    let trapezoid: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    if (trapezoid - 1.0).abs() > 1e-6 {
        return Err(Error::Input(format!(
            "density table integrates to {trapezoid}, expected 1"
        )));
    }
    let density = Pchip::new(xs, ys)?;
    let (lo, hi) = density.domain();
    Ok(VelocityField::GridDerived {
        density,
        flux: mean_velocity_target / (hi - lo),
    })
}

impl VelocityField {
    pub fn continuity(profile: DensityProfile, flux: f64) -> Self {
        Self::Continuity { profile, flux }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            Self::PhaseGradient(_) => FieldKind::PhaseGradient,
            Self::Continuity { .. } => FieldKind::Continuity,
            Self::GridDerived { .. } => FieldKind::GridDerived,
        }
    }

    pub fn flux_constant(&self) -> Option<f64> {
        match self {
            Self::PhaseGradient(_) => None,
            Self::Continuity { flux, .. } | Self::GridDerived { flux, .. } => Some(*flux),
        }
    }

    pub fn params(&self) -> Option<&SystemParams> {
        match self {
            Self::PhaseGradient(wf) => Some(&wf.params),
            Self::Continuity { profile, .. } => Some(&profile.params),
            Self::GridDerived { .. } => None,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::PhaseGradient(wf) => (0.0, wf.params.length),
            Self::Continuity { profile, .. } => (0.0, profile.length()),
            Self::GridDerived { density, .. } => density.domain(),
        }
    }

    /// Velocity at `x`; `±∞` marks an exact density node.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        match self {
            Self::PhaseGradient(wf) => phase_gradient_velocity(wf, x),
            Self::Continuity { profile, flux } => continuity_velocity(profile, *flux, x),
            Self::GridDerived { density, flux } => {
                Ok(flux_over_density(*flux, density.eval(x)?.max(0.0)))
            }
        }
    }

    /// Positions where the field diverges, ascending.
    pub fn nodes(&self) -> Vec<f64> {
        match self {
            Self::PhaseGradient(_) => Vec::new(),
            Self::Continuity { flux, .. } | Self::GridDerived { flux, .. } if *flux == 0.0 => {
                Vec::new()
            }
            Self::Continuity { profile, .. } => profile.nodes(),
            Self::GridDerived { density, .. } => density
                .xs()
                .iter()
                .zip(density.ys())
                .filter(|(_, r)| **r == 0.0)
                .map(|(x, _)| *x)
                .collect(),
        }
    }

    /// Whether wrapping `x` modulo the domain keeps the field continuous.
    pub fn supports_periodic(&self) -> bool {
        self.params().is_none_or(SystemParams::is_periodic)
    }

    /// `ρ(x)·v(x)` against `profile`; at a divergence marker the flux limit `c` is used.
    fn flux_density(&self, profile: &DensityProfile, x: f64) -> Result<f64> {
        let v = self.evaluate(x)?;
        if v.is_infinite() {
            return self.flux_constant().ok_or(Error::FieldDivergence { x });
        }
        Ok(profile.density(x) * v)
    }
}

/// `∫₀ᴸ ρ(x) v(x) dx` by adaptive quadrature.
pub fn average_velocity(profile: &DensityProfile, field: &VelocityField) -> Result<f64> {
    average_velocity_with(profile, field, DEFAULT_ABS_TOL)
}

pub fn average_velocity_with(
    profile: &DensityProfile,
    field: &VelocityField,
    abs_tol: f64,
) -> Result<f64> {
    let r = quadrature::integrate(
        |x| field.flux_density(profile, x),
        0.0,
        profile.length(),
        abs_tol,
    )?;
    Ok(r.value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ResidualScheme {
    /// `d(ρv)/dx` from closed forms.
    Analytic,
    /// `[ρv](x+h) - [ρv](x-h)` over `2h`.
    CentralDifference { h: f64 },
}

impl ResidualScheme {
    pub fn central_default(length: f64) -> Self {
        Self::CentralDifference {
            h: DEFAULT_DIFF_STEP * length,
        }
    }
}

/// `max |d(ρv)/dx|` over `grid`.
///
/// For the phase-gradient field the analytic scheme uses `(ħ/m) Im(ψ*ψ″)`, rescaled to the
/// profile's normalization; `profile` must describe the same guide as the wavefunction.
pub fn continuity_residual(
    field: &VelocityField,
    profile: &DensityProfile,
    grid: &[f64],
    scheme: ResidualScheme,
) -> Result<f64> {
    let (lo, hi) = field.domain();
    let mut worst: f64 = 0.0;
    match scheme {
        ResidualScheme::Analytic => {
            for &x in grid {
                if !(lo..=hi).contains(&x) {
                    return Err(Error::Domain { x, lo, hi });
                }
                let r = match field {
                    VelocityField::PhaseGradient(wf) => {
                        if wf.kind != profile.kind {
                            return Err(Error::InvalidParameter(format!(
                                "profile guide {} does not match wavefunction guide {}",
                                profile.kind, wf.kind
                            )));
                        }
                        if wf.is_zero() {
                            return Err(Error::NodeSingularity { x });
                        }
                        let scale = profile.norm / wf.amplitude.norm_sqr();
                        wf.params.hbar / wf.params.mass * scale * wf.current_derivative(x)?
                    }
                    // ρ·(c/ρ) is the constant c
                    VelocityField::Continuity { .. } | VelocityField::GridDerived { .. } => 0.0,
                };
                worst = worst.max(r.abs());
            }
        }
        ResidualScheme::CentralDifference { h } => {
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("step h = {h}")));
            }
            for &x in grid {
                if x - h < lo || x + h > hi {
                    return Err(Error::Domain {
                        x,
                        lo: lo + h,
                        hi: hi - h,
                    });
                }
                let d = (field.flux_density(profile, x + h)?
                    - field.flux_density(profile, x - h)?)
                    / (2.0 * h);
                worst = worst.max(d.abs());
            }
        }
    }
    Ok(worst)
}
