//! Physical parameters, the analytic guide wavefunctions and their densities.
//!
//! Main guide: `ψ_m(x) = A cos(k₁x) e^{ik₂x}`; auxiliary guide: `ψ_a(x) = B sin(k₁x) e^{ik₂x}`.
//! Both solve the coupled stationary system
//!
//! ```text
//! E ψ_m = -(ħ²/2m) ψ_m'' + V₀ ψ_m + ħJ₀ (ψ_a - ψ_m)
//! E ψ_a = -(ħ²/2m) ψ_a'' + V₀ ψ_a + ħJ₀ (ψ_m - ψ_a)
//! ```
//!
//! when `B = ±iA`, `J₀ = ∓ħk₁k₂/m` and `E = ħ²(k₁ ± k₂)²/2m + V₀`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quadrature::{self, DEFAULT_ABS_TOL};
use crate::{Error, Result};

/// Coupling constant and energy of the coupled system, and where they came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub j0: Complex64,
    pub energy: f64,
    pub origin: CouplingOrigin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingOrigin {
    UserSupplied,
    Dispersion,
}

/// Constants and geometry of the two-guide system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub hbar: f64,
    pub mass: f64,
    /// Guide extent; the domain is `[0, length]`.
    pub length: f64,
    pub k1: f64,
    pub k2: f64,
    pub v0: f64,
    pub coupling: Option<Coupling>,
}

impl SystemParams {
    pub fn new(hbar: f64, mass: f64, length: f64, k1: f64, k2: f64, v0: f64) -> Result<Self> {
        let p = Self {
            hbar,
            mass,
            length,
            k1,
            k2,
            v0,
            coupling: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// ħ = m = 1, L = 1, k₁ = 2π, k₂ = 4π, V₀ = 0.
    pub fn canonical() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            length: 1.0,
            k1: 2.0 * PI,
            k2: 4.0 * PI,
            v0: 0.0,
            coupling: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("length", self.length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("k1", self.k1), ("k2", self.k2), ("v0", self.v0)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if let Some(c) = self.coupling {
            if !(c.j0.re.is_finite() && c.j0.im.is_finite() && c.energy.is_finite()) {
                return Err(Error::InvalidParameter("non-finite coupling".into()));
            }
        }
        Ok(())
    }

    pub fn with_coupling(mut self, j0: Complex64, energy: f64) -> Self {
        self.coupling = Some(Coupling {
            j0,
            energy,
            origin: CouplingOrigin::UserSupplied,
        });
        self
    }

    pub fn with_solution(mut self, sol: &DispersionSolution) -> Self {
        self.coupling = Some(Coupling {
            j0: sol.j0,
            energy: sol.energy,
            origin: CouplingOrigin::Dispersion,
        });
        self
    }

    /// Phase-gradient velocity `ħk₂/m` of the plane-wave factor.
    pub fn plane_wave_velocity(&self) -> f64 {
        self.hbar * self.k2 / self.mass
    }

    /// True when `k₁L` is an integer multiple of π, so that ρ is L-periodic.
    pub fn is_periodic(&self) -> bool {
        let m = self.k1 * self.length / PI;
        (m - m.round()).abs() <= 1e-9 * m.abs().max(1.0)
    }

    pub(crate) fn check_domain(&self, x: f64) -> Result<()> {
        if (0.0..=self.length).contains(&x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                lo: 0.0,
                hi: self.length,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveguideKind {
    /// `ψ_m ∝ cos(k₁x) e^{ik₂x}`
    #[serde(rename = "main")]
    Main,
    /// `ψ_a ∝ sin(k₁x) e^{ik₂x}`
    #[serde(rename = "aux")]
    Auxiliary,
}

impl WaveguideKind {
    pub fn other(self) -> Self {
        match self {
            Self::Main => Self::Auxiliary,
            Self::Auxiliary => Self::Main,
        }
    }
}

impl fmt::Display for WaveguideKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Main => "main",
            Self::Auxiliary => "aux",
        })
    }
}

/// `sin(z)/z` with the removable point filled.
fn sinc(z: f64) -> f64 {
    if z.abs() < 0.1 {
        1.0 - one_minus_sinc(z)
    } else {
        z.sin() / z
    }
}

/// `1 - sin(z)/z`, accurate for small z.
fn one_minus_sinc(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let z2 = z * z;
        z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)))
    } else {
        1.0 - z.sin() / z
    }
}

/// `∫₀ˣ cos²(k₁s) ds` (Main) or `∫₀ˣ sin²(k₁s) ds` (Auxiliary).
fn trig_square_integral(kind: WaveguideKind, k1: f64, x: f64) -> f64 {
    let z = 2.0 * k1 * x;
    match kind {
        WaveguideKind::Main => 0.5 * x * (1.0 + sinc(z)),
        WaveguideKind::Auxiliary => 0.5 * x * one_minus_sinc(z),
    }
}

fn trig(kind: WaveguideKind, k1: f64, x: f64) -> (f64, f64) {
    let (s, c) = (k1 * x).sin_cos();
    match kind {
        WaveguideKind::Main => (c, -k1 * s),
        WaveguideKind::Auxiliary => (s, k1 * c),
    }
}

/// Normalization constant `A > 0` with `A² ∫₀ᴸ trig²(k₁x) dx = 1`, from the closed form.
pub fn normalization_constant(params: &SystemParams, kind: WaveguideKind) -> Result<f64> {
    params.validate()?;
    let integral = trig_square_integral(kind, params.k1, params.length);
    if !(integral > 0.0) {
        return Err(Error::DegenerateDensity(format!(
            "{kind} guide has vanishing density integral (k1 = {})",
            params.k1
        )));
    }
    Ok(integral.recip().sqrt())
}

/// Same constant from adaptive quadrature of the squared trig factor.
pub fn normalization_constant_quadrature(
    params: &SystemParams,
    kind: WaveguideKind,
    abs_tol: f64,
) -> Result<f64> {
    params.validate()?;
    let k1 = params.k1;
    let r = quadrature::integrate_fn(|x| trig(kind, k1, x).0.powi(2), 0.0, params.length, abs_tol)?;
    if !(r.value > abs_tol) {
        return Err(Error::DegenerateDensity(format!(
            "{kind} guide has vanishing density integral (k1 = {k1})"
        )));
    }
    Ok(r.value.recip().sqrt())
}

/// Analytic wavefunction of one guide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveFunction {
    pub kind: WaveguideKind,
    /// Proportionality constant, including any phase relative to the other guide.
    pub amplitude: Complex64,
    pub params: SystemParams,
}

/// Builds the guide wavefunction with a real amplitude, normalized over `[0, L]` if asked.
pub fn make_wavefunction(
    params: &SystemParams,
    kind: WaveguideKind,
    normalize: bool,
) -> Result<WaveFunction> {
    params.validate()?;
    let a = if normalize {
        normalization_constant(params, kind)?
    } else {
        1.0
    };
    Ok(WaveFunction {
        kind,
        amplitude: Complex64::new(a, 0.0),
        params: *params,
    })
}

impl WaveFunction {
    pub fn with_amplitude(
        params: &SystemParams,
        kind: WaveguideKind,
        amplitude: Complex64,
    ) -> Self {
        Self {
            kind,
            amplitude,
            params: *params,
        }
    }

    /// ψ (order 0), ψ′ (order 1) or ψ″ (order 2) at `x`, by closed-form differentiation.
    pub fn evaluate(&self, x: f64, order: usize) -> Result<Complex64> {
        self.params.check_domain(x)?;
        let k1 = self.params.k1;
        let k2 = self.params.k2;
        let (t, dt) = trig(self.kind, k1, x);
        let (s, c) = (k2 * x).sin_cos();
        let plane = Complex64::new(c, s);
        let factor = match order {
            0 => Complex64::new(t, 0.0),
            1 => Complex64::new(dt, k2 * t),
            // T'' = -k1² T
            2 => Complex64::new(-(k1 * k1 + k2 * k2) * t, 2.0 * k2 * dt),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "derivative order {order} not supported"
                )))
            }
        };
        Ok(self.amplitude * factor * plane)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.evaluate(x, 0)?.norm_sqr())
    }

    /// Probability current `Im(ψ*ψ′)` (without the ħ/m factor).
    ///
    /// The unimodular plane-wave factor cancels analytically in `ψ*ψ′`, which keeps the
    /// quotient by `|ψ|²` accurate right up to the nodes.
    pub fn current(&self, x: f64) -> Result<f64> {
        self.params.check_domain(x)?;
        let (t, _) = self.trig_parts(x);
        Ok(self.amplitude.norm_sqr() * self.params.k2 * t * t)
    }

    /// `Im(ψ*ψ″)`, the x-derivative of the current.
    pub fn current_derivative(&self, x: f64) -> Result<f64> {
        self.params.check_domain(x)?;
        let (t, dt) = self.trig_parts(x);
        Ok(self.amplitude.norm_sqr() * 2.0 * self.params.k2 * t * dt)
    }

    /// Real factor `cos(k₁x)` or `sin(k₁x)` and its derivative.
    pub(crate) fn trig_parts(&self, x: f64) -> (f64, f64) {
        trig(self.kind, self.params.k1, x)
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == Complex64::new(0.0, 0.0)
            || (self.kind == WaveguideKind::Auxiliary && self.params.k1 == 0.0)
    }
}

/// Normalized stationary density `ρ(x) = norm · trig²(k₁x)` on `[0, L]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityProfile {
    pub kind: WaveguideKind,
    pub params: SystemParams,
    /// Density scale `A²`.
    pub norm: f64,
}

impl DensityProfile {
    /// Normalized profile of the given guide.
    pub fn new(params: &SystemParams, kind: WaveguideKind) -> Result<Self> {
        let a = normalization_constant(params, kind)?;
        Ok(Self {
            kind,
            params: *params,
            norm: a * a,
        })
    }

    /// Profile with an explicit scale, not necessarily normalized.
    pub fn with_norm(params: &SystemParams, kind: WaveguideKind, norm: f64) -> Result<Self> {
        params.validate()?;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "density scale must be positive, got {norm}"
            )));
        }
        Ok(Self {
            kind,
            params: *params,
            norm,
        })
    }

    pub fn from_wavefunction(wf: &WaveFunction) -> Result<Self> {
        Self::with_norm(&wf.params, wf.kind, wf.amplitude.norm_sqr())
    }

    pub fn length(&self) -> f64 {
        self.params.length
    }

    /// ρ(x); defined for any real x, callers enforce the domain.
    pub fn density(&self, x: f64) -> f64 {
        self.norm * trig(self.kind, self.params.k1, x).0.powi(2)
    }

    pub fn density_derivative(&self, x: f64) -> f64 {
        let k1 = self.params.k1;
        let s = (2.0 * k1 * x).sin();
        match self.kind {
            WaveguideKind::Main => -self.norm * k1 * s,
            WaveguideKind::Auxiliary => self.norm * k1 * s,
        }
    }

    /// `∫₀ᴸ ρ`, closed form.
    pub fn total(&self) -> f64 {
        self.norm * trig_square_integral(self.kind, self.params.k1, self.params.length)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.total() - 1.0).abs() <= tol
    }

    /// Cumulative probability `F(x) = ∫₀ˣ ρ`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.params.check_domain(x)?;
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        self.norm * trig_square_integral(self.kind, self.params.k1, x)
    }

    /// Position `x` with `F(x) = u`, by Newton iteration safeguarded by bisection.
    ///
    /// F is strictly increasing (nodes are isolated zeros of ρ), so the root is unique.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Probability(u));
        }
        let l = self.params.length;
        if u == 0.0 {
            return Ok(0.0);
        }
        if u == 1.0 {
            return Ok(l);
        }
        let (mut lo, mut hi) = (0.0, l);
        let mut x = u * l;
        let mut best = (f64::INFINITY, x);
        for _ in 0..200 {
            let f = self.cdf_unchecked(x) - u;
            if f.abs() < best.0 {
                best = (f.abs(), x);
            }
            if f == 0.0 {
                return Ok(x);
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.density(x);
            let newton = x - f / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 2.0 * f64::EPSILON * l || hi - lo <= 2.0 * f64::EPSILON * l {
                let fn_ = (self.cdf_unchecked(next) - u).abs();
                if fn_ < best.0 {
                    best = (fn_, next);
                }
                break;
            }
            x = next;
        }
        Ok(best.1)
    }

    /// Zeros of ρ inside `[0, L]`, ascending.
    pub fn nodes(&self) -> Vec<f64> {
        let k1 = self.params.k1.abs();
        let l = self.params.length;
        if k1 == 0.0 {
            return Vec::new();
        }
        let offset = match self.kind {
            WaveguideKind::Main => 0.5,
            WaveguideKind::Auxiliary => 0.0,
        };
        let mut out = Vec::new();
        let mut n = 0.0;
        loop {
            let x = (offset + n) * PI / k1;
            if x > l * (1.0 + 1e-12) {
                break;
            }
            out.push(x.min(l));
            n += 1.0;
        }
        out
    }
}

/// Relative phase of the auxiliary amplitude with respect to the main one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeConvention {
    /// `B = A`
    Uniform,
    /// `B = iA`; makes J₀ real.
    #[default]
    QuadraturePhase,
}

impl AmplitudeConvention {
    pub fn relative_phase(self) -> Complex64 {
        match self {
            Self::Uniform => Complex64::new(1.0, 0.0),
            Self::QuadraturePhase => Complex64::new(0.0, 1.0),
        }
    }
}

impl fmt::Display for AmplitudeConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::QuadraturePhase => "quadrature-phase",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionSolution {
    pub j0: Complex64,
    pub energy: f64,
    pub convention: AmplitudeConvention,
    /// `B / A`
    pub relative_phase: Complex64,
    /// k₁ = 0: the auxiliary wavefunction vanishes and J₀ is not determined (0 is reported).
    pub degenerate: bool,
}

/// Coupling and energy for which the guide wavefunctions solve the coupled system.
///
/// Matching the `sin` and `cos` coefficients gives, with `B = rA` and `K = ħk₁k₂/m`,
/// `J₀ = -iK/r` from the main equation and `J₀ = iKr` from the auxiliary one. They agree
/// only for `r = ±i` (or `K = 0`); otherwise both candidates are returned in the error.
pub fn solve_dispersion(
    params: &SystemParams,
    convention: AmplitudeConvention,
) -> Result<DispersionSolution> {
    params.validate()?;
    let (hbar, m) = (params.hbar, params.mass);
    let r = convention.relative_phase();
    let kinetic = hbar * hbar * (params.k1.powi(2) + params.k2.powi(2)) / (2.0 * m);
    if params.k1 == 0.0 {
        return Ok(DispersionSolution {
            j0: Complex64::new(0.0, 0.0),
            energy: kinetic + params.v0,
            convention,
            relative_phase: r,
            degenerate: true,
        });
    }
    let k = hbar * params.k1 * params.k2 / m;
    let i = Complex64::new(0.0, 1.0);
    let j0_main = -i * k / r;
    let j0_aux = i * k * r;
    let scale = k.abs().max(f64::MIN_POSITIVE);
    if (j0_main - j0_aux).norm() > 1e-12 * scale {
        return Err(Error::InconsistentDispersion { j0_main, j0_aux });
    }
    let j0 = 0.5 * (j0_main + j0_aux);
    let energy = kinetic + params.v0 - hbar * j0;
    if energy.im.abs() > 1e-12 * energy.re.abs().max(1.0) {
        return Err(Error::InconsistentDispersion { j0_main, j0_aux });
    }
    Ok(DispersionSolution {
        j0,
        energy: energy.re,
        convention,
        relative_phase: r,
        degenerate: false,
    })
}

/// Main and auxiliary wavefunctions sharing one amplitude magnitude, related by the
/// convention's relative phase.
pub fn coupled_pair(
    params: &SystemParams,
    convention: AmplitudeConvention,
    magnitude: f64,
) -> (WaveFunction, WaveFunction) {
    let a = Complex64::new(magnitude, 0.0);
    (
        WaveFunction::with_amplitude(params, WaveguideKind::Main, a),
        WaveFunction::with_amplitude(
            params,
            WaveguideKind::Auxiliary,
            a * convention.relative_phase(),
        ),
    )
}

/// Largest residual of either coupled equation over `grid`, using analytic ψ″.
///
/// Uses the coupling stored in `params`; `main` and `aux` supply the amplitudes.
pub fn coupled_residual(
    params: &SystemParams,
    main: &WaveFunction,
    aux: &WaveFunction,
    grid: &[f64],
) -> Result<f64> {
    let coupling = params.coupling.ok_or_else(|| {
        Error::InvalidParameter("coupled residual needs (J0, E); none set".into())
    })?;
    if main.kind != WaveguideKind::Main || aux.kind != WaveguideKind::Auxiliary {
        return Err(Error::InvalidParameter(
            "expected (main, auxiliary) wavefunction pair".into(),
        ));
    }
    let kin = params.hbar * params.hbar / (2.0 * params.mass);
    let hj = params.hbar * coupling.j0;
    let e = coupling.energy;
    let mut worst: f64 = 0.0;
    for &x in grid {
        params.check_domain(x)?;
        let pm = main.evaluate(x, 0)?;
        let pa = aux.evaluate(x, 0)?;
        let rm = e * pm - (-kin * main.evaluate(x, 2)? + params.v0 * pm + hj * (pa - pm));
        let ra = e * pa - (-kin * aux.evaluate(x, 2)? + params.v0 * pa + hj * (pm - pa));
        worst = worst.max(rm.norm()).max(ra.norm());
    }
    Ok(worst)
}

/// `n` equally spaced points covering `[0, L]` inclusive.
pub fn uniform_grid(length: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    length
                } else {
                    length * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Cross-checks the closed-form normalization constant against quadrature.
pub fn normalization_discrepancy(params: &SystemParams, kind: WaveguideKind) -> Result<f64> {
    let closed = normalization_constant(params, kind)?;
    let quad = normalization_constant_quadrature(params, kind, DEFAULT_ABS_TOL)?;
    Ok((closed - quad).abs())
}
