//! Subcommand bodies. Each returns a JSON report and the exit code it implies.

use std::path::Path;

use serde_json::{json, Value};

use super::config::RunConfig;
use super::csvio::write_csv;
use super::{FieldArg, MethodArg, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use crate::ensemble::{
    expected_histogram, histogram, ks_distance_at, propagate, propagate_field, sample_initial,
    MIN_KS_SAMPLES,
};
use crate::model::{
    coupled_pair, make_wavefunction, normalization_constant, normalization_discrepancy,
    solve_dispersion, uniform_grid, DensityProfile, SystemParams, WaveFunction, WaveguideKind,
};
use crate::trajectory::{
    integrate_analytic, integrate_ode, transit_time, BoundaryPolicy, Terminal, TrajectoryPath,
};
use crate::velocity::{
    average_velocity_with, continuity_residual, fit_flux_constant_with, phase_gradient_velocity,
    ResidualScheme, VelocityField,
};
use crate::{model, Error, Result};

/// Grid points closer than this fraction of L to a node are moved off it.
pub const NODE_SHIFT: f64 = 1e-9;
/// Points used for the dispersion residual.
pub const RESIDUAL_GRID: usize = 10_000;
/// Tolerances of the `verify` checks that are not configurable.
pub const CENTRAL_RESIDUAL_TOL: f64 = 1e-6;
pub const PHASE_RESIDUAL_TOL: f64 = 1e-8;
pub const AVERAGE_TOL: f64 = 1e-9;
pub const TRANSIT_TOL: f64 = 1e-12;
pub const FLUX_CONSTANCY_TOL: f64 = 1e-14;
const TRANSIT_K1: [f64; 4] = [1.0, 2.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Value,
    pub exit: i32,
}

impl Outcome {
    fn new(report: Value, exit: i32) -> Self {
        Self { report, exit }
    }
}

pub(crate) fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| Error::Input("--out <path> is required for this command".into()))
}

fn complex_json(z: num_complex::Complex64) -> Value {
    // + 0.0 turns -0 into 0
    json!([z.re + 0.0, z.im + 0.0])
}

fn field_name(field: FieldArg) -> &'static str {
    match field {
        FieldArg::Phase => "phase",
        FieldArg::Continuity => "continuity",
    }
}

fn boundary_name(b: BoundaryPolicy) -> &'static str {
    match b {
        BoundaryPolicy::Absorb => "absorb",
        BoundaryPolicy::Periodic => "periodic",
    }
}

/// Normalized profile, wavefunction and fitted flux constant of one guide.
struct GuideSetup {
    profile: DensityProfile,
    wf: WaveFunction,
    flux: f64,
}

impl GuideSetup {
    fn new(params: &SystemParams, guide: WaveguideKind, quad_tol: f64) -> Result<Self> {
        let profile = DensityProfile::new(params, guide)?;
        let wf = make_wavefunction(params, guide, true)?;
        let flux = fit_flux_constant_with(&profile, &wf, quad_tol)?;
        Ok(Self { profile, wf, flux })
    }

    fn from_config(cfg: &RunConfig) -> Result<Self> {
        Self::new(&cfg.base_params()?, cfg.guide, cfg.tolerances.quadrature)
    }

    fn continuity_field(&self) -> VelocityField {
        VelocityField::continuity(self.profile, self.flux)
    }

    fn phase_field(&self) -> VelocityField {
        VelocityField::PhaseGradient(self.wf)
    }

    fn field(&self, which: FieldArg) -> VelocityField {
        match which {
            FieldArg::Phase => self.phase_field(),
            FieldArg::Continuity => self.continuity_field(),
        }
    }
}

enum DispersionCheck {
    Residual {
        report: Value,
        residual: f64,
        passed: bool,
    },
    Inconsistent(Value),
}

fn dispersion_check(cfg: &RunConfig) -> Result<DispersionCheck> {
    let base = cfg.base_params()?;
    let convention = cfg.amplitude_convention;
    let params = match cfg.coupled_params() {
        Ok(p) => p,
        Err(Error::InconsistentDispersion { j0_main, j0_aux }) => {
            return Ok(DispersionCheck::Inconsistent(json!({
                "status": "inconsistent",
                "convention": convention.to_string(),
                "candidates": {
                    "main": complex_json(j0_main),
                    "aux": complex_json(j0_aux),
                },
            })));
        }
        Err(e) => return Err(e),
    };
    let coupling = params
        .coupling
        .ok_or_else(|| Error::Numerical("coupling was not resolved".into()))?;
    let degenerate = solve_dispersion(&base, convention).is_ok_and(|s| s.degenerate);
    let magnitude = normalization_constant(&base, WaveguideKind::Main)?;
    let (main, aux) = coupled_pair(&params, convention, magnitude);
    let grid = uniform_grid(base.length, RESIDUAL_GRID);
    let residual = model::coupled_residual(&params, &main, &aux, &grid)?;
    let passed = residual < cfg.tolerances.residual;
    let report = json!({
        "status": if passed { "consistent" } else { "residual-exceeded" },
        "j0": complex_json(coupling.j0),
        "energy": coupling.energy,
        "origin": coupling.origin,
        "convention": convention.to_string(),
        "degenerate": degenerate,
        "residual": residual,
        "tolerance": cfg.tolerances.residual,
        "grid_points": RESIDUAL_GRID,
    });
    Ok(DispersionCheck::Residual {
        report,
        residual,
        passed,
    })
}

/// Reports `(J₀, E)` and the worst coupled-equation residual.
pub fn cmd_dispersion(cfg: &RunConfig) -> Result<Outcome> {
    Ok(match dispersion_check(cfg)? {
        DispersionCheck::Residual { report, passed, .. } => {
            Outcome::new(report, if passed { EXIT_OK } else { EXIT_VERIFY })
        }
        DispersionCheck::Inconsistent(report) => Outcome::new(report, EXIT_VERIFY),
    })
}

/// Equally spaced grid over `[0, L]` with points on a node nudged by `NODE_SHIFT·L`.
fn shifted_grid(profile: &DensityProfile, samples: usize) -> Vec<f64> {
    let l = profile.length();
    let eps = NODE_SHIFT * l;
    let nodes = profile.nodes();
    uniform_grid(l, samples)
        .into_iter()
        .map(|x| match nodes.iter().find(|&&n| (x - n).abs() < eps) {
            Some(&n) if n + eps <= l => n + eps,
            Some(&n) => n - eps,
            None => x,
        })
        .collect()
}

/// Writes `x,rho,v_phase,v_continuity,flux` and summarizes the selected field.
pub fn cmd_velocity(
    cfg: &RunConfig,
    field: FieldArg,
    samples: usize,
    out: &Path,
) -> Result<Outcome> {
    if samples < 2 {
        return Err(Error::TooFewSamples { n: samples, min: 2 });
    }
    let g = GuideSetup::from_config(cfg)?;
    let cont = g.continuity_field();
    let rows = shifted_grid(&g.profile, samples)
        .into_iter()
        .map(|x| {
            let rho = g.profile.density(x);
            let v_cont = cont.evaluate(x)?;
            Ok(vec![
                x,
                rho,
                phase_gradient_velocity(&g.wf, x)?,
                v_cont,
                rho * v_cont,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out, &["x", "rho", "v_phase", "v_continuity", "flux"], &rows)?;
    let average = average_velocity_with(&g.profile, &g.field(field), cfg.tolerances.quadrature)?;
    Ok(Outcome::new(
        json!({
            "guide": cfg.guide,
            "field": field_name(field),
            "samples": samples,
            "node_shift": NODE_SHIFT * g.profile.length(),
            "flux_constant": g.flux,
            "average_velocity": average,
            "out": out.display().to_string(),
        }),
        EXIT_OK,
    ))
}

/// Integrates one trajectory and writes `t,x`.
///
/// The analytic method follows the continuity flow exactly; the ODE method integrates
/// either field. A step-limit stop is reported and exits 1.
pub fn cmd_trajectory(
    cfg: &RunConfig,
    field: FieldArg,
    x0: f64,
    t_final: f64,
    method: MethodArg,
    samples: usize,
    out: &Path,
) -> Result<Outcome> {
    let g = GuideSetup::from_config(cfg)?;
    let (path, status): (TrajectoryPath, &str) = match method {
        MethodArg::Analytic => {
            if field == FieldArg::Phase {
                return Err(Error::InvalidParameter(
                    "the analytic method follows the continuity flow; use --method ode with --field phase"
                        .into(),
                ));
            }
            match integrate_analytic(&g.profile, g.flux, x0, t_final, cfg.boundary, samples) {
                Ok(p) => {
                    let label = p.terminal.label();
                    (p, label)
                }
                Err(Error::StationaryFlow { path }) => (path, "Stationary"),
                Err(e) => return Err(e),
            }
        }
        MethodArg::Ode => {
            let p = integrate_ode(
                &g.field(field),
                x0,
                t_final,
                cfg.boundary,
                cfg.ode_controls(),
            )?;
            let label = p.terminal.label();
            (p, label)
        }
    };
    let rows: Vec<Vec<f64>> = path.samples.iter().map(|&(t, x)| vec![t, x]).collect();
    write_csv(out, &["t", "x"], &rows)?;
    let absorbed_time = match path.terminal {
        Terminal::Absorbed(t) => Some(t),
        _ => None,
    };
    let exit = if path.terminal == Terminal::StepLimit {
        EXIT_USAGE
    } else {
        EXIT_OK
    };
    Ok(Outcome::new(
        json!({
            "method": match method { MethodArg::Analytic => "analytic", MethodArg::Ode => "ode" },
            "field": field_name(field),
            "boundary": boundary_name(cfg.boundary),
            "status": status,
            "absorbed_time": absorbed_time,
            "final_time": path.final_time(),
            "final_position": path.final_position(),
            "rows": rows.len(),
            "flux_constant": g.flux,
            "out": out.display().to_string(),
        }),
        exit,
    ))
}

/// Samples `n` members from ρ, propagates them for `dt` and compares with ρ.
///
/// Under the periodic boundary the KS test decides the exit code; under absorb no test
/// runs because the surviving members are no longer distributed as ρ.
pub fn cmd_ensemble(
    cfg: &RunConfig,
    field: FieldArg,
    n: usize,
    dt: f64,
    bins: usize,
    out: &Path,
) -> Result<Outcome> {
    if n < MIN_KS_SAMPLES {
        return Err(Error::TooFewSamples {
            n,
            min: MIN_KS_SAMPLES,
        });
    }
    let level = cfg.significance()?;
    let g = GuideSetup::from_config(cfg)?;
    let initial = sample_initial(&g.profile, n, cfg.seed)?;
    let ens = match field {
        FieldArg::Continuity => propagate(&initial, &g.profile, g.flux, dt, cfg.boundary)?,
        FieldArg::Phase => propagate_field(
            &initial,
            &g.phase_field(),
            dt,
            cfg.boundary,
            cfg.ode_controls(),
        )?,
    };
    let expected = expected_histogram(&g.profile, bins)?;
    let empirical = if ens.is_empty() {
        vec![0.0; bins]
    } else {
        histogram(&ens, bins)?.into_iter().map(|(_, d)| d).collect()
    };
    let rows: Vec<Vec<f64>> = expected
        .iter()
        .zip(&empirical)
        .map(|(&(centre, e), &emp)| vec![centre, emp, e])
        .collect();
    write_csv(out, &["bin_center", "empirical", "expected"], &rows)?;

    let (ks, threshold, passed, exit) = match cfg.boundary {
        BoundaryPolicy::Periodic => {
            let fit = ks_distance_at(&ens, &g.profile, level)?;
            let exit = if fit.passed { EXIT_OK } else { EXIT_VERIFY };
            (
                Some(fit.ks_statistic),
                Some(fit.threshold),
                Some(fit.passed),
                exit,
            )
        }
        BoundaryPolicy::Absorb => (None, None, None, EXIT_OK),
    };
    Ok(Outcome::new(
        json!({
            "ks": ks,
            "threshold": threshold,
            "passed": passed,
            "seed": cfg.seed,
            "absorbed": ens.absorbed,
            "n": n,
            "remaining": ens.len(),
            "dt": dt,
            "alpha": level.alpha(),
            "field": field_name(field),
            "boundary": boundary_name(cfg.boundary),
            "flux_constant": g.flux,
            "out": out.display().to_string(),
        }),
        exit,
    ))
}

fn check(name: &str, passed: bool, value: Value, tolerance: f64) -> Value {
    json!({ "name": name, "passed": passed, "value": value, "tolerance": tolerance })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Midpoints of `n` equal cells of `[lo, hi]`.
fn cell_midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64)
        .collect()
}

/// Runs every consistency check; exits 2 naming the failures.
pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let base = cfg.base_params()?;
    let g = GuideSetup::from_config(cfg)?;
    let l = base.length;
    let tol = cfg.tolerances;
    let mut checks = Vec::new();

    checks.push(match dispersion_check(cfg)? {
        DispersionCheck::Residual {
            residual, passed, ..
        } => check("dispersion", passed, json!(residual), tol.residual),
        DispersionCheck::Inconsistent(report) => check("dispersion", false, report, tol.residual),
    });

    let cont = g.continuity_field();
    let grid = cell_midpoints(0.0, l, RESIDUAL_GRID);
    let analytic = continuity_residual(&cont, &g.profile, &grid, ResidualScheme::Analytic)?;
    let mut spread: f64 = 0.0;
    if g.flux != 0.0 {
        for &x in &grid {
            let v = cont.evaluate(x)?;
            if v.is_finite() {
                spread = spread.max((g.profile.density(x) * v - g.flux).abs() / g.flux.abs());
            }
        }
    }
    let value = analytic.max(spread);
    checks.push(check(
        "continuity_analytic",
        value <= FLUX_CONSTANCY_TOL,
        json!(value),
        FLUX_CONSTANCY_TOL,
    ));

    let scheme = ResidualScheme::central_default(l);
    let h = match scheme {
        ResidualScheme::CentralDifference { h } => h,
        ResidualScheme::Analytic => unreachable!(),
    };
    let inner = cell_midpoints(h, l - h, RESIDUAL_GRID);
    let central = continuity_residual(&cont, &g.profile, &inner, scheme)?;
    checks.push(check(
        "continuity_central",
        central < CENTRAL_RESIDUAL_TOL,
        json!(central),
        CENTRAL_RESIDUAL_TOL,
    ));

    let phase = g.phase_field();
    let phase_residual = continuity_residual(&phase, &g.profile, &grid, ResidualScheme::Analytic)?;
    let slope = grid
        .iter()
        .map(|&x| g.profile.density_derivative(x).abs())
        .fold(0.0, f64::max);
    let predicted = base.plane_wave_velocity() * slope;
    checks.push(json!({
        "name": "phase_residual",
        "passed": close(phase_residual, predicted, PHASE_RESIDUAL_TOL),
        "value": phase_residual,
        "expected": predicted,
        "tolerance": PHASE_RESIDUAL_TOL,
    }));

    let target = base.plane_wave_velocity();
    let avg_phase = average_velocity_with(&g.profile, &phase, tol.quadrature)?;
    let avg_cont = average_velocity_with(&g.profile, &cont, tol.quadrature)?;
    checks.push(json!({
        "name": "average_matching",
        "passed": close(avg_phase, target, AVERAGE_TOL) && close(avg_cont, target, AVERAGE_TOL),
        "value": { "phase": avg_phase, "continuity": avg_cont },
        "expected": target,
        "tolerance": AVERAGE_TOL,
    }));

    checks.push(if base.k2 > 0.0 {
        let expected = base.mass * l / (base.hbar * base.k2);
        let mut times = Vec::new();
        for m in TRANSIT_K1 {
            let p = SystemParams {
                k1: m * std::f64::consts::PI / l,
                coupling: None,
                ..base
            };
            let s = GuideSetup::new(&p, cfg.guide, tol.quadrature)?;
            times.push(transit_time(&s.profile, s.flux, 0.0)?);
        }
        json!({
            "name": "transit_time",
            "passed": times.iter().all(|&t| close(t, expected, TRANSIT_TOL)),
            "value": times,
            "expected": expected,
            "tolerance": TRANSIT_TOL,
        })
    } else {
        json!({ "name": "transit_time", "passed": true, "skipped": "k2 <= 0: no forward transit" })
    });

    let disc = normalization_discrepancy(&base, cfg.guide)?;
    checks.push(check(
        "normalization",
        disc < tol.residual,
        json!(disc),
        tol.residual,
    ));

    let failed: Vec<String> = checks
        .iter()
        .filter(|c| c["passed"] != json!(true))
        .filter_map(|c| c["name"].as_str().map(str::to_owned))
        .collect();
    let exit = if failed.is_empty() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    };
    if !failed.is_empty() {
        eprintln!("verify: failing checks: {}", failed.join(", "));
    }
    Ok(Outcome::new(
        json!({ "passed": failed.is_empty(), "failed": failed, "checks": checks }),
        exit,
    ))
}
