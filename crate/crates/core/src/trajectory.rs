//! Single-particle trajectories `dx/dt = v(x)`.
//!
//! For `v = c/ρ` the flow is exact: `dt = ρ dx / c` integrates to
//! `F(x(t)) = F(x₀) + c t`, so `x(t) = F⁻¹(F(x₀) + c t)`. The divergent velocity at a
//! node costs no time because `ρ` vanishes there.
//!
//! [`integrate_ode`] handles arbitrary fields with adaptive Dormand–Prince stepping in
//! time. Inside `node_guard` of a node it integrates `dt/dx = 1/v(x)` instead, which
//! stays regular (`1/v = ρ/c → 0`).

use serde::{Deserialize, Serialize};

use crate::model::DensityProfile;
use crate::ode::{dopri5_step, error_ratio, step_factor};
use crate::velocity::VelocityField;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Terminate on reaching the exit boundary.
    #[default]
    Absorb,
    /// Re-enter at the opposite boundary. Needs `k₁L ∈ πℤ`.
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Terminal {
    Completed,
    /// Left the domain at the given time.
    Absorbed(f64),
    StepLimit,
}

impl Terminal {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Completed => "Completed",
            Self::Absorbed(_) => "Absorbed",
            Self::StepLimit => "StepLimit",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPath {
    /// `(time, position)` with strictly increasing times.
    pub samples: Vec<(f64, f64)>,
    pub terminal: Terminal,
}

impl TrajectoryPath {
    fn start(x0: f64) -> Self {
        Self {
            samples: vec![(0.0, x0)],
            terminal: Terminal::Completed,
        }
    }

    fn push(&mut self, t: f64, x: f64) {
        match self.samples.last_mut() {
            Some(last) if t <= last.0 => {
                if t == last.0 {
                    last.1 = x;
                }
            }
            _ => self.samples.push((t, x)),
        }
    }

    pub fn final_position(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.1)
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.0)
    }
}

/// Where the exact flow takes a particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowOutcome {
    Inside(f64),
    Absorbed { time: f64, position: f64 },
}

fn check_flow_inputs(
    profile: &DensityProfile,
    c: f64,
    x0: f64,
    t: f64,
    policy: BoundaryPolicy,
) -> Result<()> {
    profile.params.check_domain(x0)?;
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("flux constant {c}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration {t}")));
    }
    if policy == BoundaryPolicy::Periodic && !profile.params.is_periodic() {
        return Err(Error::InvalidParameter(
            "periodic boundary needs k1·L to be a multiple of π".into(),
        ));
    }
    Ok(())
}

/// Exact position after time `t` under `v = c/ρ`.
///
/// With [`BoundaryPolicy::Absorb`], a time within a few ulps of the exit time counts as
/// having exited.
pub fn flow_map(
    profile: &DensityProfile,
    c: f64,
    x0: f64,
    t: f64,
    policy: BoundaryPolicy,
) -> Result<FlowOutcome> {
    check_flow_inputs(profile, c, x0, t, policy)?;
    if c == 0.0 || t == 0.0 {
        return Ok(FlowOutcome::Inside(x0));
    }
    let f0 = profile.cdf_unchecked(x0);
    let u = match policy {
        BoundaryPolicy::Absorb => {
            let (t_exit, position) = if c > 0.0 {
                ((1.0 - f0) / c, profile.length())
            } else {
                (f0 / -c, 0.0)
            };
            if t >= t_exit * (1.0 - 4.0 * f64::EPSILON) {
                return Ok(FlowOutcome::Absorbed {
                    time: t_exit,
                    position,
                });
            }
            (f0 + c * t).clamp(0.0, 1.0)
        }
        BoundaryPolicy::Periodic => {
            let u = (f0 + c * t).rem_euclid(1.0);
            if u >= 1.0 {
                0.0
            } else {
                u
            }
        }
    };
    Ok(FlowOutcome::Inside(profile.inverse_cdf(u)?))
}

/// Exact trajectory sampled at `samples + 1` equally spaced times in `[0, t_final]`.
///
/// `c = 0` yields [`Error::StationaryFlow`] carrying the constant path.
pub fn integrate_analytic(
    profile: &DensityProfile,
    c: f64,
    x0: f64,
    t_final: f64,
    policy: BoundaryPolicy,
    samples: usize,
) -> Result<TrajectoryPath> {
    check_flow_inputs(profile, c, x0, t_final, policy)?;
    let mut path = TrajectoryPath::start(x0);
    if t_final == 0.0 {
        return Ok(path);
    }
    let n = samples.max(1);
    for i in 1..=n {
        let t = if i == n {
            t_final
        } else {
            t_final * i as f64 / n as f64
        };
        match flow_map(profile, c, x0, t, policy)? {
            FlowOutcome::Inside(x) => path.push(t, x),
            FlowOutcome::Absorbed { time, position } => {
                path.push(time, position);
                path.terminal = Terminal::Absorbed(time);
                return Ok(path);
            }
        }
    }
    if c == 0.0 {
        return Err(Error::StationaryFlow { path });
    }
    Ok(path)
}

/// Time to reach `x = L` under `v = c/ρ`: `(1 - F(x₀))/c`.
pub fn transit_time(profile: &DensityProfile, c: f64, x0: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::Direction { c });
    }
    Ok((1.0 - profile.cdf(x0)?).max(0.0) / c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Budget of attempted steps (accepted and rejected).
    pub max_steps: usize,
    /// Half-width of the position-stepping zone around each node, as a fraction of L.
    pub node_guard: f64,
}

impl Default for OdeControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
            node_guard: 1e-3,
        }
    }
}

enum Segment {
    Reached,
    Stopped,
    StepLimit,
}

/// Stage abscissa left the region where time stepping is allowed.
struct OutOfRegion;

struct Stepper<'a> {
    field: &'a VelocityField,
    controls: OdeControls,
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    guard: f64,
    dir: f64,
    t_final: f64,
    steps: usize,
    t: f64,
    x: f64,
    path: TrajectoryPath,
}

impl Stepper<'_> {
    fn ahead(&self, from: f64, to: f64) -> bool {
        (to - from) * self.dir > 0.0
    }

    fn exit_boundary(&self) -> f64 {
        if self.dir > 0.0 {
            self.hi
        } else {
            self.lo
        }
    }

    fn entry_boundary(&self) -> f64 {
        if self.dir > 0.0 {
            self.lo
        } else {
            self.hi
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Far edge of the guard zone(s) containing `x`, if any.
    fn zone_exit(&self, x: f64) -> Option<f64> {
        let mut exit: Option<f64> = None;
        let mut probe = x;
        loop {
            let next = self.nodes.iter().find_map(|&n| {
                let back = n - self.guard * self.dir;
                let front = self.clamp(n + self.guard * self.dir);
                let inside = !self.ahead(probe, back) && self.ahead(probe, front);
                inside.then_some(front)
            });
            match next {
                Some(front) if exit.is_none_or(|e| self.ahead(e, front)) => {
                    exit = Some(front);
                    probe = front;
                }
                _ => return exit,
            }
        }
    }

    /// Nearest guard-zone entry or the exit boundary ahead of `x`.
    fn barrier(&self, x: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&n| n - self.guard * self.dir)
            .filter(|&b| self.ahead(x, b))
            .fold(self.exit_boundary(), |acc, b| {
                if self.ahead(b, acc) {
                    b
                } else {
                    acc
                }
            })
    }

    fn budget_left(&mut self) -> bool {
        self.steps += 1;
        self.steps <= self.controls.max_steps
    }

    /// Integrates `dt/dx = 1/v` from the current position to `target`, stopping early
    /// if `t_final` is reached.
    fn position_segment(&mut self, target: f64) -> Result<Segment> {
        let (rel, abs) = (self.controls.rel_tol, self.controls.abs_tol);
        let field = self.field;
        let g = |s: f64, _t: f64| -> Result<f64> {
            let v = field.evaluate(s)?;
            Ok(if v.is_infinite() { 0.0 } else { 1.0 / v })
        };
        let mut hx = (target - self.x) / 8.0;
        while self.x != target {
            if !self.budget_left() {
                return Ok(Segment::StepLimit);
            }
            let last = hx.abs() >= (target - self.x).abs();
            if last {
                hx = target - self.x;
            }
            let step = dopri5_step(&g, self.x, self.t, hx)?;
            let ratio = error_ratio(&step, self.t, rel, abs);
            if ratio <= 1.0 {
                if step.y >= self.t_final {
                    // t(x) is increasing along the motion; bisect the step length.
                    let (mut a, mut b) = (0.0, hx);
                    for _ in 0..80 {
                        let mid = 0.5 * (a + b);
                        if mid == a || mid == b {
                            break;
                        }
                        if dopri5_step(&g, self.x, self.t, mid)?.y < self.t_final {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    self.x = self.clamp(self.x + 0.5 * (a + b));
                    self.t = self.t_final;
                    self.path.push(self.t, self.x);
                    return Ok(Segment::Stopped);
                }
                self.x = if last { target } else { self.x + hx };
                self.t = step.y;
                self.path.push(self.t, self.x);
            }
            hx *= step_factor(ratio);
        }
        Ok(Segment::Reached)
    }

    fn run(mut self, policy: BoundaryPolicy) -> Result<TrajectoryPath> {
        let (rel, abs) = (self.controls.rel_tol, self.controls.abs_tol);
        let mut h = f64::NAN;
        loop {
            if self.x == self.exit_boundary() {
                match policy {
                    BoundaryPolicy::Absorb => {
                        self.path.terminal = Terminal::Absorbed(self.t);
                        return Ok(self.path);
                    }
                    BoundaryPolicy::Periodic => {
                        self.x = self.entry_boundary();
                        continue;
                    }
                }
            }
            if let Some(exit) = self.zone_exit(self.x) {
                match self.position_segment(exit)? {
                    Segment::Reached => continue,
                    Segment::Stopped => return Ok(self.path),
                    Segment::StepLimit => {
                        self.path.terminal = Terminal::StepLimit;
                        return Ok(self.path);
                    }
                }
            }

            let barrier = self.barrier(self.x);
            let v = self.field.evaluate(self.x)?;
            if !v.is_finite() {
                return Err(Error::FieldDivergence { x: self.x });
            }
            if !h.is_finite() {
                h = (1e-2 * (self.hi - self.lo) / v.abs()).min(self.t_final - self.t);
            }
            if !self.budget_left() {
                self.path.terminal = Terminal::StepLimit;
                return Ok(self.path);
            }
            let remaining = self.t_final - self.t;
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let x0 = self.x;
            let (lo, hi, dir, field) = (self.lo, self.hi, self.dir, self.field);
            let f = |_t: f64, y: f64| -> Result<std::result::Result<f64, OutOfRegion>> {
                if y < lo || y > hi || (y - barrier) * dir > 0.0 {
                    return Ok(Err(OutOfRegion));
                }
                let v = field.evaluate(y)?;
                if !v.is_finite() {
                    return Err(Error::FieldDivergence { x: y });
                }
                Ok(Ok(v))
            };
            let outcome = stage_checked_step(&f, self.t, x0, h)?;
            match outcome {
                Some(step) if !self.ahead(barrier, step.y) => {
                    let ratio = error_ratio(&step, x0, rel, abs);
                    if ratio <= 1.0 {
                        self.t = if last { self.t_final } else { self.t + h };
                        self.x = step.y;
                        self.path.push(self.t, self.x);
                        if last {
                            return Ok(self.path);
                        }
                    }
                    h *= step_factor(ratio);
                }
                _ => {
                    // The step would enter a guard zone or leave the domain.
                    if (barrier - x0).abs() <= self.guard {
                        match self.position_segment(barrier)? {
                            Segment::Reached => {}
                            Segment::Stopped => return Ok(self.path),
                            Segment::StepLimit => {
                                self.path.terminal = Terminal::StepLimit;
                                return Ok(self.path);
                            }
                        }
                    } else {
                        h *= 0.5;
                    }
                }
            }
        }
    }
}

/// One Dormand–Prince step that reports `None` when a stage leaves the allowed region.
fn stage_checked_step<F>(f: &F, t: f64, x: f64, h: f64) -> Result<Option<crate::ode::Step>>
where
    F: Fn(f64, f64) -> Result<std::result::Result<f64, OutOfRegion>>,
{
    use std::cell::Cell;
    let escaped = Cell::new(false);
    let g = |s: f64, y: f64| -> Result<f64> {
        if escaped.get() {
            return Ok(0.0);
        }
        match f(s, y)? {
            Ok(v) => Ok(v),
            Err(OutOfRegion) => {
                escaped.set(true);
                Ok(0.0)
            }
        }
    };
    let step = dopri5_step(&g, t, x, h)?;
    Ok((!escaped.get()).then_some(step))
}

fn flow_direction(field: &VelocityField, x0: f64) -> Result<f64> {
    let v = field.evaluate(x0)?;
    if v.is_nan() {
        return Err(Error::Numerical(format!("velocity undefined at {x0}")));
    }
    Ok(if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    })
}

fn validate_controls(c: &OdeControls) -> Result<()> {
    if !(c.rel_tol > 0.0 && c.abs_tol > 0.0 && c.node_guard > 0.0 && c.max_steps > 0) {
        return Err(Error::InvalidParameter(format!("ODE controls {c:?}")));
    }
    Ok(())
}

/// Adaptive integration of `dx/dt = v(x)` from `x0` over `[0, t_final]`.
pub fn integrate_ode(
    field: &VelocityField,
    x0: f64,
    t_final: f64,
    policy: BoundaryPolicy,
    controls: OdeControls,
) -> Result<TrajectoryPath> {
    validate_controls(&controls)?;
    let (lo, hi) = field.domain();
    if !(lo..=hi).contains(&x0) {
        return Err(Error::Domain { x: x0, lo, hi });
    }
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration {t_final}")));
    }
    if policy == BoundaryPolicy::Periodic && !field.supports_periodic() {
        return Err(Error::InvalidParameter(
            "periodic boundary needs k1·L to be a multiple of π".into(),
        ));
    }
    let mut path = TrajectoryPath::start(x0);
    if t_final == 0.0 {
        return Ok(path);
    }
    let dir = flow_direction(field, x0)?;
    if dir == 0.0 {
        path.push(t_final, x0);
        return Ok(path);
    }
    let stepper = Stepper {
        field,
        controls,
        lo,
        hi,
        nodes: field.nodes(),
        guard: controls.node_guard * (hi - lo),
        dir,
        t_final,
        steps: 0,
        t: 0.0,
        x: x0,
        path,
    };
    stepper.run(policy)
}

/// Time for the flow to carry a particle from `from` to `to`, by integrating `dt/dx = 1/v`.
pub fn crossing_time(
    field: &VelocityField,
    from: f64,
    to: f64,
    controls: OdeControls,
) -> Result<f64> {
    validate_controls(&controls)?;
    let (lo, hi) = field.domain();
    for x in [from, to] {
        if !(lo..=hi).contains(&x) {
            return Err(Error::Domain { x, lo, hi });
        }
    }
    if from == to {
        return Ok(0.0);
    }
    let dir = flow_direction(field, from)?;
    if dir * (to - from) <= 0.0 {
        return Err(Error::Direction {
            c: field.flux_constant().unwrap_or(dir),
        });
    }
    let mut stepper = Stepper {
        field,
        controls,
        lo,
        hi,
        nodes: Vec::new(),
        guard: 0.0,
        dir,
        t_final: f64::INFINITY,
        steps: 0,
        t: 0.0,
        x: from,
        path: TrajectoryPath::start(from),
    };
    match stepper.position_segment(to)? {
        Segment::Reached | Segment::Stopped => Ok(stepper.t),
        Segment::StepLimit => Err(Error::Numerical("step limit while crossing".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_wavefunction, SystemParams, WaveguideKind};
    use std::f64::consts::PI;

    fn main_profile() -> DensityProfile {
        DensityProfile::new(&SystemParams::canonical(), WaveguideKind::Main).unwrap()
    }

    #[test]
    fn time_to_quarter() {
        let prof = main_profile();
        let c = 4.0 * PI;
        // F(0.25) = 0.25, so t = 0.25/(4π) = 0.019894367886486918. x = 0.25 is a node where
        // F - 0.25 ~ 26 δ³, so an ulp in u moves x by ~1e-6.
        let t = 0.019_894_367_886_486_918;
        match flow_map(&prof, c, 0.0, t, BoundaryPolicy::Absorb).unwrap() {
            FlowOutcome::Inside(x) => assert!((x - 0.25).abs() < 1e-5, "{x}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_at_transit_time() {
        let prof = main_profile();
        let c = 4.0 * PI;
        let path = integrate_analytic(&prof, c, 0.0, 1.0 / (4.0 * PI), BoundaryPolicy::Absorb, 10)
            .unwrap();
        assert_eq!(path.final_position(), 1.0);
        assert!(matches!(path.terminal, Terminal::Absorbed(_)));
        let zero = integrate_analytic(&prof, c, 0.3, 0.0, BoundaryPolicy::Absorb, 10).unwrap();
        assert_eq!(zero.samples, vec![(0.0, 0.3)]);
    }

    #[test]
    fn stationary_flow_error_carries_path() {
        let prof = main_profile();
        match integrate_analytic(&prof, 0.0, 0.3, 1.0, BoundaryPolicy::Absorb, 4) {
            Err(Error::StationaryFlow { path }) => {
                assert_eq!(path.samples.len(), 5);
                assert!(path.samples.iter().all(|s| s.1 == 0.3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transit_times() {
        let prof = main_profile();
        let c = 4.0 * PI;
        let full = transit_time(&prof, c, 0.0).unwrap();
        assert!((full - 0.079_577_471_545_947_67).abs() < 1e-15);
        let half = transit_time(&prof, c, 0.5).unwrap();
        assert!((half - 0.5 * full).abs() < 1e-15);
        assert_eq!(transit_time(&prof, c, 1.0).unwrap(), 0.0);
        assert!(matches!(
            transit_time(&prof, 0.0, 0.0),
            Err(Error::Direction { .. })
        ));
        assert!(matches!(
            transit_time(&prof, -1.0, 0.0),
            Err(Error::Direction { .. })
        ));
    }

    #[test]
    fn periodic_requires_commensurate_k1() {
        let p = SystemParams::new(1.0, 1.0, 1.0, 2.5, 1.0, 0.0).unwrap();
        let prof = DensityProfile::new(&p, WaveguideKind::Main).unwrap();
        assert!(flow_map(&prof, 1.0, 0.1, 0.1, BoundaryPolicy::Periodic).is_err());
    }

    #[test]
    fn ode_matches_oracle_value() {
        let prof = main_profile();
        let field = VelocityField::continuity(prof, 4.0 * PI);
        let path = integrate_ode(
            &field,
            0.1,
            0.05,
            BoundaryPolicy::Absorb,
            OdeControls::default(),
        )
        .unwrap();
        // x(0.05) from x0 = 0.1, computed at 40 digits
        assert!((path.final_position() - 0.883_160_609_529_570_4).abs() < 1e-6);
        assert_eq!(path.final_time(), 0.05);
        assert!(path
            .samples
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
    }

    #[test]
    fn ode_constant_phase_velocity() {
        let wf = make_wavefunction(&SystemParams::canonical(), WaveguideKind::Main, true).unwrap();
        let field = VelocityField::PhaseGradient(wf);
        let path = integrate_ode(
            &field,
            0.0,
            0.01,
            BoundaryPolicy::Absorb,
            OdeControls::default(),
        )
        .unwrap();
        assert!((path.final_position() - 0.125_663_706_143_591_73).abs() < 1e-12);
        let zero = integrate_ode(
            &field,
            0.4,
            0.0,
            BoundaryPolicy::Absorb,
            OdeControls::default(),
        )
        .unwrap();
        assert_eq!(zero.samples, vec![(0.0, 0.4)]);
    }

    #[test]
    fn ode_step_limit() {
        let prof = main_profile();
        let field = VelocityField::continuity(prof, 4.0 * PI);
        let controls = OdeControls {
            max_steps: 5,
            ..OdeControls::default()
        };
        let path = integrate_ode(&field, 0.1, 0.05, BoundaryPolicy::Absorb, controls).unwrap();
        assert_eq!(path.terminal, Terminal::StepLimit);
    }

    #[test]
    fn ode_absorbs_and_wraps() {
        let prof =
            DensityProfile::new(&SystemParams::canonical(), WaveguideKind::Auxiliary).unwrap();
        let c = 4.0 * PI;
        let field = VelocityField::continuity(prof, c);
        let c0 = OdeControls::default();
        let path = integrate_ode(&field, 0.0, 1.0, BoundaryPolicy::Absorb, c0).unwrap();
        match path.terminal {
            Terminal::Absorbed(t) => assert!((t - 1.0 / c).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let t = 1.3 / c;
        let path = integrate_ode(&field, 0.0, t, BoundaryPolicy::Periodic, c0).unwrap();
        let FlowOutcome::Inside(exact) =
            flow_map(&prof, c, 0.0, t, BoundaryPolicy::Periodic).unwrap()
        else {
            panic!()
        };
        assert!((path.final_position() - exact).abs() < 1e-6);
    }

    #[test]
    fn crossing_time_through_node() {
        let prof = main_profile();
        let c = 4.0 * PI;
        let field = VelocityField::continuity(prof, c);
        let t = crossing_time(&field, 0.2, 0.25, OdeControls::default()).unwrap();
        let exact = (prof.cdf(0.25).unwrap() - prof.cdf(0.2).unwrap()) / c;
        assert!((t - exact).abs() < 1e-10);
        assert!(crossing_time(&field, 0.3, 0.2, OdeControls::default()).is_err());
    }
}
