//! JSON run configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys are rejected.
//!
//! | key | default |
//! |-----|---------|
//! | `hbar`, `mass`, `length` | 1 |
//! | `k1`, `k2` | 2π, 4π |
//! | `v0` | 0 |
//! | `j0` (`[re, im]`), `energy` | unset: solved from the dispersion relation |
//! | `guide` | `"main"` (`"aux"`) |
//! | `amplitude_convention` | `"quadrature-phase"` (`"uniform"`) |
//! | `boundary` | `"absorb"` (`"periodic"`) |
//! | `seed` | 0 |
//! | `alpha` | 0.01 (0.05) |
//! | `tolerances` | `{quadrature: 1e-12, ode_rel: 1e-9, ode_abs: 1e-12, residual: 1e-10}` |

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::Significance;
use crate::model::{solve_dispersion, AmplitudeConvention, SystemParams, WaveguideKind};
use crate::trajectory::{BoundaryPolicy, OdeControls};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub quadrature: f64,
    pub ode_rel: f64,
    pub ode_abs: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: 1e-12,
            ode_rel: 1e-9,
            ode_abs: 1e-12,
            residual: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub hbar: f64,
    pub mass: f64,
    pub length: f64,
    pub k1: f64,
    pub k2: f64,
    pub v0: f64,
    pub j0: Option<[f64; 2]>,
    pub energy: Option<f64>,
    pub guide: WaveguideKind,
    pub amplitude_convention: AmplitudeConvention,
    pub boundary: BoundaryPolicy,
    pub seed: u64,
    pub alpha: f64,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            length: 1.0,
            k1: 2.0 * PI,
            k2: 4.0 * PI,
            v0: 0.0,
            j0: None,
            energy: None,
            guide: WaveguideKind::Main,
            amplitude_convention: AmplitudeConvention::QuadraturePhase,
            boundary: BoundaryPolicy::Absorb,
            seed: 0,
            alpha: 0.01,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads the document at `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::from_json(&std::fs::read_to_string(p)?),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base_params()?;
        self.significance()?;
        let t = &self.tolerances;
        for (name, v) in [
            ("quadrature", t.quadrature),
            ("ode_rel", t.ode_rel),
            ("ode_abs", t.ode_abs),
            ("residual", t.residual),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// System parameters without any coupling attached.
    pub fn base_params(&self) -> Result<SystemParams> {
        SystemParams::new(self.hbar, self.mass, self.length, self.k1, self.k2, self.v0)
    }

    /// System parameters with `(J₀, E)` attached: user values where given, the dispersion
    /// solution for anything missing. The solution is solved only when something is missing.
    pub fn coupled_params(&self) -> Result<SystemParams> {
        let p = self.base_params()?;
        let user_j0 = self.j0.map(|[re, im]| Complex64::new(re, im));
        if let (Some(j0), Some(e)) = (user_j0, self.energy) {
            return Ok(p.with_coupling(j0, e));
        }
        let sol = solve_dispersion(&p, self.amplitude_convention)?;
        Ok(match (user_j0, self.energy) {
            (None, None) => p.with_solution(&sol),
            (j0, e) => p.with_coupling(j0.unwrap_or(sol.j0), e.unwrap_or(sol.energy)),
        })
    }

    pub fn significance(&self) -> Result<Significance> {
        Significance::from_alpha(self.alpha).ok_or_else(|| {
            Error::InvalidParameter(format!("alpha must be 0.01 or 0.05, got {}", self.alpha))
        })
    }

    pub fn ode_controls(&self) -> OdeControls {
        OdeControls {
            rel_tol: self.tolerances.ode_rel,
            abs_tol: self.tolerances.ode_abs,
            ..OdeControls::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_canonical() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.base_params().unwrap(), SystemParams::canonical());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"kk": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tolerances": {"foo": 1}}"#).is_err());
        assert!(RunConfig::from_json("not json").is_err());
    }

    #[test]
    fn enums_and_coupling_parse() {
        let c = RunConfig::from_json(
            r#"{"guide": "aux", "amplitude_convention": "uniform", "boundary": "periodic",
                "j0": [-1.0, 0.5], "energy": 3.0, "alpha": 0.05}"#,
        )
        .unwrap();
        assert_eq!(c.guide, WaveguideKind::Auxiliary);
        assert_eq!(c.amplitude_convention, AmplitudeConvention::Uniform);
        assert_eq!(c.boundary, BoundaryPolicy::Periodic);
        let p = c.coupled_params().unwrap();
        assert_eq!(p.coupling.unwrap().j0, Complex64::new(-1.0, 0.5));
        assert_eq!(p.coupling.unwrap().energy, 3.0);
        c.validate().unwrap();
    }

    #[test]
    fn partial_coupling_is_completed_from_dispersion() {
        let c = RunConfig::from_json(r#"{"energy": 3.0}"#).unwrap();
        let k = c.coupled_params().unwrap().coupling.unwrap();
        assert_eq!(k.energy, 3.0);
        assert!((k.j0 - Complex64::new(-8.0 * PI * PI, 0.0)).norm() < 1e-9);
        let u = RunConfig {
            amplitude_convention: AmplitudeConvention::Uniform,
            ..RunConfig::default()
        };
        assert!(u.coupled_params().is_err());
        assert!(u.base_params().is_ok());
    }

    #[test]
    fn validation_failures() {
        let c = RunConfig::from_json(r#"{"alpha": 0.2}"#).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_json(r#"{"length": 0}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
