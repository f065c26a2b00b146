//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use bohmflow::ensemble::{ks_distance, propagate, propagate_field, sample_initial};
use bohmflow::model::{
    coupled_pair, make_wavefunction, normalization_constant, solve_dispersion, uniform_grid,
    AmplitudeConvention, DensityProfile, SystemParams, WaveguideKind,
};
use bohmflow::trajectory::{
    flow_map, integrate_ode, transit_time, BoundaryPolicy, FlowOutcome, OdeControls, Terminal,
};
use bohmflow::velocity::{
    average_velocity, continuity_residual, fit_flux_constant, phase_gradient_velocity,
    ResidualScheme, VelocityField,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: bohmflow::Error) -> String {
    e.to_string()
}

fn canonical_main() -> Result<(SystemParams, DensityProfile, f64), String> {
    let p = SystemParams::canonical();
    let prof = DensityProfile::new(&p, WaveguideKind::Main).map_err(err)?;
    let wf = make_wavefunction(&p, WaveguideKind::Main, true).map_err(err)?;
    let c = fit_flux_constant(&prof, &wf).map_err(err)?;
    Ok((p, prof, c))
}

fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn dispersion() -> Outcome {
    let p = SystemParams::canonical();
    let sol = solve_dispersion(&p, AmplitudeConvention::QuadraturePhase).map_err(err)?;
    let (j0, e) = (-8.0 * PI * PI, 18.0 * PI * PI);
    let rel_j = (sol.j0.re - j0).abs().max(sol.j0.im.abs()) / j0.abs();
    let rel_e = (sol.energy - e).abs() / e;
    ensure(rel_j < 1e-10, || format!("J0 = {} (rel {rel_j:e})", sol.j0))?;
    ensure(rel_e < 1e-10, || {
        format!("E = {} (rel {rel_e:e})", sol.energy)
    })?;
    let cp = p.with_solution(&sol);
    let a = normalization_constant(&p, WaveguideKind::Main).map_err(err)?;
    let (m, x) = coupled_pair(&cp, sol.convention, a);
    let r =
        bohmflow::model::coupled_residual(&cp, &m, &x, &uniform_grid(1.0, 10_000)).map_err(err)?;
    ensure(r < 1e-10, || format!("residual {r:e}"))?;
    Ok(format!(
        "J0 rel {rel_j:.1e}, E rel {rel_e:.1e}, residual {r:.2e}"
    ))
}

fn continuity_identity() -> Outcome {
    let (p, prof, c) = canonical_main()?;
    let cont = VelocityField::continuity(prof, c);
    let mut spread: f64 = 0.0;
    for x in midpoints(10_000) {
        let flux = prof.density(x) * cont.evaluate(x).map_err(err)?;
        spread = spread.max((flux - c).abs() / c);
    }
    ensure(spread <= 1e-14, || format!("ρv spread {spread:e}"))?;

    let h = 1e-4;
    let inner: Vec<f64> = midpoints(10_000)
        .into_iter()
        .map(|u| h + (1.0 - 2.0 * h) * u)
        .collect();
    let central = continuity_residual(
        &cont,
        &prof,
        &inner,
        ResidualScheme::CentralDifference { h },
    )
    .map_err(err)?;
    ensure(central < 1e-6, || format!("central residual {central:e}"))?;

    let wf = make_wavefunction(&p, WaveguideKind::Main, true).map_err(err)?;
    let phase = VelocityField::PhaseGradient(wf);
    let grid = uniform_grid(1.0, 10_001);
    let r = continuity_residual(&phase, &prof, &grid, ResidualScheme::Analytic).map_err(err)?;
    // (ħk₂/m)·max|ρ′| with ρ′ = -4π sin(4πx)
    let expected = 4.0 * PI * 4.0 * PI;
    ensure(r > 0.0 && (r - expected).abs() < 1e-8, || {
        format!("phase residual {r} vs {expected}")
    })?;
    Ok(format!(
        "ρv spread {spread:.1e}, central {central:.1e}, phase residual {r:.12} = 16π²"
    ))
}

fn average_matching() -> Outcome {
    let (p, prof, c) = canonical_main()?;
    let wf = make_wavefunction(&p, WaveguideKind::Main, true).map_err(err)?;
    let target = 4.0 * PI;
    let a_phase = average_velocity(&prof, &VelocityField::PhaseGradient(wf)).map_err(err)?;
    let a_cont = average_velocity(&prof, &VelocityField::continuity(prof, c)).map_err(err)?;
    for (name, a) in [("phase", a_phase), ("continuity", a_cont)] {
        ensure((a - target).abs() < 1e-9, || format!("{name} average {a}"))?;
    }

    let flat = SystemParams::new(1.0, 1.0, 1.0, 0.0, 4.0 * PI, 0.0).map_err(err)?;
    let fprof = DensityProfile::new(&flat, WaveguideKind::Main).map_err(err)?;
    let fwf = make_wavefunction(&flat, WaveguideKind::Main, true).map_err(err)?;
    let fc = fit_flux_constant(&fprof, &fwf).map_err(err)?;
    let mut worst: f64 = 0.0;
    for x in uniform_grid(1.0, 1001) {
        let vp = phase_gradient_velocity(&fwf, x).map_err(err)?;
        let vc = bohmflow::velocity::continuity_velocity(&fprof, fc, x).map_err(err)?;
        worst = worst.max((vp - vc).abs());
    }
    ensure(worst < 1e-12, || {
        format!("uniform-density mismatch {worst:e}")
    })?;
    Ok(format!(
        "averages {:.1e}/{:.1e} from 4π, uniform-density mismatch {worst:.1e}",
        (a_phase - target).abs(),
        (a_cont - target).abs()
    ))
}

fn transit_universality() -> Outcome {
    let expected = 1.0 / (4.0 * PI);
    let mut worst: f64 = 0.0;
    for m in [1.0, 2.0, 3.0, 5.0] {
        let p = SystemParams::new(1.0, 1.0, 1.0, m * PI, 4.0 * PI, 0.0).map_err(err)?;
        let prof = DensityProfile::new(&p, WaveguideKind::Main).map_err(err)?;
        let wf = make_wavefunction(&p, WaveguideKind::Main, true).map_err(err)?;
        let c = fit_flux_constant(&prof, &wf).map_err(err)?;
        let t = transit_time(&prof, c, 0.0).map_err(err)?;
        worst = worst.max((t - expected).abs());
    }
    ensure(worst < 1e-12, || format!("transit deviation {worst:e}"))?;

    let (_, prof, c) = canonical_main()?;
    let field = VelocityField::continuity(prof, c);
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let (mut max_dx, mut crossings): (f64, usize) = (0.0, 0);
    for _ in 0..100 {
        let x0: f64 = rng.random();
        let t = rng.random::<f64>() * 0.15;
        let exact = match flow_map(&prof, c, x0, t, BoundaryPolicy::Periodic).map_err(err)? {
            FlowOutcome::Inside(x) => x,
            other => return Err(format!("unexpected {other:?}")),
        };
        let path = integrate_ode(
            &field,
            x0,
            t,
            BoundaryPolicy::Periodic,
            OdeControls::default(),
        )
        .map_err(err)?;
        ensure(path.terminal == Terminal::Completed, || {
            format!("ODE stopped with {:?} from {x0}", path.terminal)
        })?;
        let d = (path.final_position() - exact).abs();
        max_dx = max_dx.max(d.min(1.0 - d));
        // F(x₀) + ct passes a node whenever it passes a quarter mark
        let u0 = prof.cdf(x0).map_err(err)?;
        let u1 = u0 + c * t;
        crossings += ((u1 - 0.25).floor() - (u0 - 0.25).floor()) as usize
            + ((u1 - 0.75).floor() - (u0 - 0.75).floor()) as usize;
    }
    ensure(max_dx < 1e-6, || format!("ODE vs exact {max_dx:e}"))?;
    ensure(crossings > 0, || "no node crossings sampled".into())?;
    Ok(format!(
        "transit deviation {worst:.1e}, ODE vs exact {max_dx:.1e} over 100 pairs ({crossings} node crossings)"
    ))
}

fn equivariance() -> Outcome {
    let (p, prof, c) = canonical_main()?;
    let wf = make_wavefunction(&p, WaveguideKind::Main, true).map_err(err)?;
    let phase = VelocityField::PhaseGradient(wf);
    let quarter = 0.25 / (4.0 * PI);
    let (mut passes, mut phase_fails) = (0, 0);
    let mut stats = Vec::new();
    for seed in 1..=5u64 {
        let ens = sample_initial(&prof, 100_000, seed).map_err(err)?;
        let moved = propagate(&ens, &prof, c, 0.05, BoundaryPolicy::Periodic).map_err(err)?;
        let fit = ks_distance(&moved, &prof).map_err(err)?;
        passes += fit.passed as usize;
        let shifted = propagate_field(
            &ens,
            &phase,
            quarter,
            BoundaryPolicy::Periodic,
            OdeControls::default(),
        )
        .map_err(err)?;
        let bad = ks_distance(&shifted, &prof).map_err(err)?;
        phase_fails += (!bad.passed) as usize;
        stats.push(format!("{:.4}/{:.3}", fit.ks_statistic, bad.ks_statistic));
    }
    ensure(passes >= 4 && phase_fails == 5, || {
        format!("continuity passes {passes}/5, phase fails {phase_fails}/5")
    })?;
    Ok(format!(
        "continuity passes {passes}/5, phase fails {phase_fails}/5, KS (continuity/phase) {}",
        stats.join(" ")
    ))
}

fn run_cli(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_bohmflow"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn determinism_and_exit_codes() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let (a, b) = (path("a.csv"), path("b.csv"));
    for target in [&a, &b] {
        let (code, _) = run_cli(&[
            "ensemble",
            "--n",
            "20000",
            "--seed",
            "7",
            "--boundary",
            "periodic",
            "--out",
            &s(target),
        ])?;
        ensure(code == 0, || format!("ensemble exit {code}"))?;
    }
    let same = std::fs::read(&a).map_err(|e| e.to_string())?
        == std::fs::read(&b).map_err(|e| e.to_string())?;
    ensure(same, || {
        "ensemble CSV differs between identical runs".into()
    })?;

    let malformed = path("bad.json");
    std::fs::write(&malformed, "{ not json").map_err(|e| e.to_string())?;
    let cases: [(&[&str], i32); 6] = [
        (&["dispersion"], 0),
        (&["verify"], 0),
        (&["dispersion", "--convention", "uniform"], 2),
        (&["verify", "--energy", "177.65387921960845"], 2),
        (&["dispersion", "--config", &s(&malformed)], 1),
        (&["ensemble", "--n", "5", "--out", &s(&path("e.csv"))], 1),
    ];
    for (args, want) in cases {
        let (code, _) = run_cli(args)?;
        ensure(code == want, || {
            format!("{args:?} exited {code}, expected {want}")
        })?;
    }
    Ok("byte-identical ensemble CSV; exit codes 0/1/2 as documented".into())
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("dispersion consistency", dispersion),
        ("continuity identity", continuity_identity),
        (
            "average matching and constant-density reduction",
            average_matching,
        ),
        (
            "transit-time universality and ODE agreement",
            transit_universality,
        ),
        ("equivariance", equivariance),
        (
            "determinism and interface contract",
            determinism_and_exit_codes,
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
