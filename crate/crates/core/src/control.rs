//! Computed-torque tracking and the three path controllers: the robust
//! time-optimal tracker (TOPT), online scaling (OS) and fixed-trajectory
//! tracking (TT).

use nalgebra::DVector;

use crate::dynamics::{CoefficientTriple, DynamicsModel};
use crate::error::{Error, Result};
use crate::geometry::PathSpline;
use crate::reachability::{live_u_interval, ControllableSets, DiscretizationGrid, Interval, VelocityProfile};
use crate::sim::CoupledState;

/// Diagonal PD gains of the computed-torque law.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingGains {
    pub kp: DVector<f64>,
    pub kd: DVector<f64>,
}

impl TrackingGains {
    pub fn new(kp: DVector<f64>, kd: DVector<f64>) -> Result<Self> {
        if kp.len() != kd.len() {
            return Err(Error::DimensionMismatch { expected: kp.len(), got: kd.len() });
        }
        if kp.iter().chain(kd.iter()).any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidConfig("gains must be positive and finite".into()));
        }
        Ok(Self { kp, kd })
    }

    /// `K_p = ω²I`, `K_d = 2ωI`.
    pub fn critically_damped(joints: usize, omega: f64) -> Self {
        Self { kp: DVector::from_element(joints, omega * omega), kd: DVector::from_element(joints, 2.0 * omega) }
    }
}

/// Output of the computed-torque law before and after clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCommand {
    pub raw: DVector<f64>,
    pub applied: DVector<f64>,
}

impl TorqueCommand {
    pub fn saturated(&self) -> bool {
        self.raw != self.applied
    }
}

/// `τ = M(q)[q̈_d + K_p e + K_d ė] + q̇ᵀC(q)q̇ + h(q)`, clamped to the torque bounds.
pub fn computed_torque(
    model: &DynamicsModel,
    y: &CoupledState,
    qdd_desired: &DVector<f64>,
    e: &DVector<f64>,
    ed: &DVector<f64>,
    gains: &TrackingGains,
) -> Result<TorqueCommand> {
    let commanded = qdd_desired + gains.kp.component_mul(e) + gains.kd.component_mul(ed);
    let raw = model.inverse_dynamics(&y.q, &y.qd, &commanded)?;
    let applied = DVector::from_fn(raw.len(), |j, _| raw[j].clamp(model.tau_min()[j], model.tau_max()[j]));
    Ok(TorqueCommand { raw, applied })
}

/// Greatest `u` keeping the measured torques `â·u + b̂·x + ĉ` in bounds and
/// the transition inside `landing`.
pub fn greatest_feasible_control(
    live: &CoefficientTriple,
    tau_min: &DVector<f64>,
    tau_max: &DVector<f64>,
    x: f64,
    landing: &Interval,
) -> Option<f64> {
    live_u_interval(live, tau_min, tau_max, x)?.intersect(landing).map(|iv| iv.hi)
}

/// Time-indexed reference obtained from a squared-velocity profile.
#[derive(Debug, Clone, PartialEq)]
pub struct TtReference {
    path: PathSpline,
    grid: DiscretizationGrid,
    profile: VelocityProfile,
    times: Vec<f64>,
}

/// One sample of the time-indexed reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TtSample {
    pub s: f64,
    pub sd: f64,
    pub u: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub qdd: DVector<f64>,
}

impl TtReference {
    pub fn new(profile: &VelocityProfile, grid: &DiscretizationGrid, path: &PathSpline) -> Result<Self> {
        if profile.u.len() != grid.stages() {
            return Err(Error::DimensionMismatch { expected: grid.stages(), got: profile.u.len() });
        }
        if let Some(stage) = profile.degenerate_stage {
            return Err(Error::DegenerateProfile { stage });
        }
        Ok(Self {
            path: path.clone(),
            grid: grid.clone(),
            profile: profile.clone(),
            times: profile.stage_times(grid),
        })
    }

    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Reference at time `t`, held at the end state for `t` past the duration.
    pub fn eval(&self, t: f64) -> Result<TtSample> {
        let n = self.grid.stages();
        let t = t.clamp(0.0, self.duration());
        let i = self.times.partition_point(|&ti| ti <= t).saturating_sub(1).min(n - 1);
        let tau = (t - self.times[i]).min(self.times[i + 1] - self.times[i]);
        let v0 = self.profile.x[i].max(0.0).sqrt();
        let u = self.profile.u[i];
        let s = (self.grid.s(i) + v0 * tau + 0.5 * u * tau * tau).clamp(self.grid.s(i), self.grid.s(i + 1));
        let sd = (v0 + u * tau).max(0.0);
        let (s, sd) = if t >= self.duration() { (1.0, self.profile.x[n].max(0.0).sqrt()) } else { (s, sd) };
        let pt = self.path.point(s)?;
        Ok(TtSample {
            s,
            sd,
            u,
            qd: &pt.dq * sd,
            qdd: &pt.dq * u + &pt.ddq * (sd * sd),
            q: pt.q,
        })
    }
}

/// Which path controller drives the parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Topt,
    Os,
    Tt,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Topt, Mode::Os, Mode::Tt];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Topt => "topt",
            Mode::Os => "os",
            Mode::Tt => "tt",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "topt" => Ok(Mode::Topt),
            "os" => Ok(Mode::Os),
            "tt" => Ok(Mode::Tt),
            other => Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
enum ModeData {
    Topt { sets: ControllableSets },
    Os { profile: VelocityProfile, gain: f64 },
    Tt { reference: TtReference },
}

/// One control decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u: f64,
    pub torque: TorqueCommand,
    /// Position tracking error `q_d − q`.
    pub e: DVector<f64>,
    /// Velocity tracking error `q̇_d − q̇`.
    pub ed: DVector<f64>,
    pub stage: usize,
    /// TOPT/OS: no control satisfied the live constraints. TT: torque clamped.
    pub infeasible: bool,
    /// TOPT only: state outside the controllable set at the current position.
    pub excursion: bool,
    /// Path state imposed by a time-indexed reference (TT).
    pub path_state: Option<(f64, f64)>,
}

/// Path controller plus computed-torque tracker; single owner, stepped by the
/// simulation loop.
#[derive(Debug, Clone)]
pub struct ControllerState {
    model: DynamicsModel,
    path: PathSpline,
    grid: DiscretizationGrid,
    gains: TrackingGains,
    mode: ModeData,
    stage: usize,
    /// Hold time of each control sample; TOPT uses it to see grid crossings.
    sample_time: f64,
}

/// Unit proportional gain on squared-velocity error for the OS baseline.
pub const OS_DEFAULT_GAIN: f64 = 1.0;

impl ControllerState {
    fn new(model: &DynamicsModel, path: &PathSpline, grid: &DiscretizationGrid, gains: &TrackingGains, mode: ModeData) -> Result<Self> {
        let n = model.joint_count();
        if path.joint_count() != n {
            return Err(Error::DimensionMismatch { expected: n, got: path.joint_count() });
        }
        if gains.kp.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: gains.kp.len() });
        }
        Ok(Self { model: model.clone(), path: path.clone(), grid: grid.clone(), gains: gains.clone(), mode, stage: 0, sample_time: 1e-3 })
    }

    pub fn topt(
        model: &DynamicsModel,
        path: &PathSpline,
        grid: &DiscretizationGrid,
        gains: &TrackingGains,
        sets: &ControllableSets,
    ) -> Result<Self> {
        if sets.stages() != grid.stages() {
            return Err(Error::DimensionMismatch { expected: grid.stages(), got: sets.stages() });
        }
        if let Some(stage) = sets.first_empty {
            return Err(Error::InvalidConfig(format!("controllable set at stage {stage} is empty")));
        }
        Self::new(model, path, grid, gains, ModeData::Topt { sets: sets.clone() })
    }

    pub fn online_scaling(
        model: &DynamicsModel,
        path: &PathSpline,
        grid: &DiscretizationGrid,
        gains: &TrackingGains,
        reference: &VelocityProfile,
        gain: f64,
    ) -> Result<Self> {
        if reference.u.len() != grid.stages() {
            return Err(Error::DimensionMismatch { expected: grid.stages(), got: reference.u.len() });
        }
        Self::new(model, path, grid, gains, ModeData::Os { profile: reference.clone(), gain })
    }

    pub fn trajectory_tracking(
        model: &DynamicsModel,
        path: &PathSpline,
        grid: &DiscretizationGrid,
        gains: &TrackingGains,
        reference: &VelocityProfile,
    ) -> Result<Self> {
        let reference = TtReference::new(reference, grid, path)?;
        Self::new(model, path, grid, gains, ModeData::Tt { reference })
    }

    pub fn with_sample_time(mut self, dt: f64) -> Self {
        self.sample_time = dt;
        self
    }

    pub fn mode(&self) -> Mode {
        match self.mode {
            ModeData::Topt { .. } => Mode::Topt,
            ModeData::Os { .. } => Mode::Os,
            ModeData::Tt { .. } => Mode::Tt,
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn model(&self) -> &DynamicsModel {
        &self.model
    }

    /// Tracking errors against the online reference `p(s)`, `p'(s)ṡ`.
    pub fn tracking_error(&self, y: &CoupledState) -> Result<(DVector<f64>, DVector<f64>)> {
        let pt = self.path.point(y.s)?;
        Ok((&pt.q - &y.q, &pt.dq * y.sd - &y.qd))
    }

    /// Coefficients of the torque the tracker would command at `y`, as a
    /// function of `(u, ṡ²)`.
    pub fn live_coefficients(&self, y: &CoupledState) -> Result<CoefficientTriple> {
        let (e, ed) = self.tracking_error(y)?;
        self.model.perturbed_coefficients(&self.path, y.s, y.sd, &e, &ed, &self.gains)
    }

    /// Computes `(τ, u)` at time `t` for the coupled state `y`.
    pub fn step(&mut self, t: f64, y: &CoupledState) -> Result<ControlOutput> {
        self.stage = self.grid.stage_of(y.s);
        match &self.mode {
            ModeData::Tt { reference } => {
                let r = reference.eval(t)?;
                let e = &r.q - &y.q;
                let ed = &r.qd - &y.qd;
                let torque = computed_torque(&self.model, y, &r.qdd, &e, &ed, &self.gains)?;
                Ok(ControlOutput {
                    u: r.u,
                    infeasible: torque.saturated(),
                    torque,
                    e,
                    ed,
                    stage: self.grid.stage_of(r.s),
                    excursion: false,
                    path_state: Some((r.s, r.sd)),
                })
            }
            _ if y.s >= 1.0 => {
                // path finished: hold the end point
                let x = y.sd * y.sd;
                self.finish(y, x, 0.0, false, false)
            }
            ModeData::Topt { sets } => {
                let x = y.sd * y.sd;
                let live = self.live_coefficients(y)?;
                let (target, landing) = self.landing_constraint(sets, y.s, y.sd, x);
                let torque_iv = live_u_interval(&live, self.model.tau_min(), self.model.tau_max(), x);
                let here = interpolate_set(sets, &self.grid, y.s);
                let excursion = !(here.lo - SET_SLACK <= x && x <= here.hi + SET_SLACK);
                let (u, infeasible) = match torque_iv.and_then(|iv| iv.intersect(&landing)) {
                    Some(iv) => (iv.hi, false),
                    None => {
                        let u = match torque_iv {
                            Some(iv) => toward_target(&iv, &landing, x, &target),
                            None => least_violation_control(&live, self.model.tau_min(), self.model.tau_max(), x, &landing),
                        };
                        (u, true)
                    }
                };
                self.finish(y, x, u, infeasible, excursion)
            }
            ModeData::Os { profile, gain } => {
                let x = y.sd * y.sd;
                let i = self.stage;
                let u_ref = profile.u[i];
                let x_ref = profile.x[i] + 2.0 * (y.s - self.grid.s(i)) * u_ref;
                let desired = u_ref + gain * (x_ref - x);
                let live = self.live_coefficients(y)?;
                let (u, infeasible) = match live_u_interval(&live, self.model.tau_min(), self.model.tau_max(), x) {
                    Some(iv) => (iv.clamp(desired), false),
                    None => (u_ref, true),
                };
                self.finish(y, x, u, infeasible, false)
            }
        }
    }

    fn finish(&self, y: &CoupledState, x: f64, u: f64, infeasible: bool, excursion: bool) -> Result<ControlOutput> {
        let pt = self.path.point(y.s)?;
        let e = &pt.q - &y.q;
        let ed = &pt.dq * y.sd - &y.qd;
        let qdd_desired = &pt.dq * u + &pt.ddq * x;
        let torque = computed_torque(&self.model, y, &qdd_desired, &e, &ed, &self.gains)?;
        Ok(ControlOutput { u, torque, e, ed, stage: self.stage, infeasible, excursion, path_state: None })
    }

    /// Target `K_{i+1}` and the controls landing in it from `(s, x)`. When
    /// the coming sample will cross `s_{i+1}`, the controls must also land
    /// in `K_{i+2}`, since the held control carries on past the grid point.
    fn landing_constraint(&self, sets: &ControllableSets, s: f64, sd: f64, x: f64) -> (Interval, Interval) {
        let i = self.grid.stage_of(s);
        let n = self.grid.stages();
        let target = widen(sets.get(i + 1).expect("feasible sets"));
        let dist = self.grid.s(i + 1) - s;
        let mut iv = landing(x, &target, dist);
        if i + 2 <= n && sd * self.sample_time >= dist {
            let after = widen(sets.get(i + 2).expect("feasible sets"));
            let far = landing(x, &after, dist + self.grid.delta(i + 1));
            iv = iv.intersect(&far).unwrap_or(Interval { lo: f64::INFINITY, hi: f64::NEG_INFINITY });
        }
        (target, iv)
    }
}

/// Slack on squared velocity when testing set membership online. Set
/// endpoints sit up to the bisection tolerance inside the exact sets, so a
/// state riding an exact boundary would otherwise be flagged.
pub const SET_SLACK: f64 = 1e-9;

fn widen(k: Interval) -> Interval {
    Interval { lo: k.lo - SET_SLACK, hi: k.hi + SET_SLACK }
}

/// Controllable set at an arbitrary `s`, linear between grid sets.
pub fn interpolate_set(sets: &ControllableSets, grid: &DiscretizationGrid, s: f64) -> Interval {
    let n = grid.stages();
    let j = grid.stage_of(s);
    let w = ((s - grid.s(j)) / grid.delta(j)).clamp(0.0, 1.0);
    let a = sets.get(j).expect("feasible sets");
    if w == 0.0 {
        return a;
    }
    let b = sets.get((j + 1).min(n)).expect("feasible sets");
    if w == 1.0 {
        return b;
    }
    Interval { lo: a.lo + w * (b.lo - a.lo), hi: a.hi + w * (b.hi - a.hi) }
}

/// Controls landing in `target` after travelling `dist` along the path.
/// With no distance left, everything or nothing lands depending on `x`.
fn landing(x: f64, target: &Interval, dist: f64) -> Interval {
    if dist > 0.0 {
        crate::reachability::landing_interval(x, target, dist)
    } else if target.contains(x) {
        Interval::ALL
    } else {
        Interval { lo: f64::INFINITY, hi: f64::NEG_INFINITY }
    }
}

/// Live-feasible control closest to the landing interval: the most negative
/// one when the state is too fast for the target, the most positive otherwise.
fn toward_target(live: &Interval, landing: &Interval, x: f64, target: &Interval) -> f64 {
    let too_fast = if landing.lo <= landing.hi { landing.hi < live.lo } else { x > target.hi };
    if too_fast {
        live.lo
    } else {
        live.hi
    }
}

/// Control minimizing the worst torque-bound violation, nudged toward the
/// landing interval when that interval is finite.
fn least_violation_control(
    live: &CoefficientTriple,
    tau_min: &DVector<f64>,
    tau_max: &DVector<f64>,
    x: f64,
    landing: &Interval,
) -> f64 {
    let violation = |u: f64| {
        let tau = live.torque(u, x);
        (0..tau.len()).map(|j| (tau[j] - tau_max[j]).max(tau_min[j] - tau[j])).fold(f64::NEG_INFINITY, f64::max)
    };
    let (mut lo, mut hi) = (-1e4, 1e4);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if violation(m1) <= violation(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let u = 0.5 * (lo + hi);
    if landing.lo <= landing.hi {
        landing.clamp(u)
    } else {
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reachability::{compute_controllable_sets, greedy_forward_pass, ReachOptions};
    use crate::scenario::Scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        sc: Scenario,
        grid: DiscretizationGrid,
        sets: ControllableSets,
        profile: VelocityProfile,
    }

    fn nominal_arm() -> Fixture {
        let sc = Scenario::shipped("arm2").unwrap();
        let grid = sc.grid();
        let constraints = sc.constraints(0.0).unwrap();
        let sets = compute_controllable_sets(&constraints, &grid, Interval::point(0.0), &ReachOptions::default()).unwrap();
        let profile = greedy_forward_pass(&constraints, &grid, &sets, 0.0).unwrap();
        Fixture { sc, grid, sets, profile }
    }

    /// On-path state at `s` with squared velocity `x`.
    fn on_path(path: &PathSpline, s: f64, x: f64) -> CoupledState {
        let pt = path.point(s).unwrap();
        CoupledState { qd: &pt.dq * x.sqrt(), q: pt.q, s, sd: x.sqrt() }
    }

    #[test]
    fn zero_error_topt_reproduces_greedy_profile() {
        let f = nominal_arm();
        // a tiny hold time keeps every sample inside its stage
        let mut ctl = ControllerState::topt(&f.sc.model, &f.sc.path, &f.grid, &f.sc.gains(), &f.sets).unwrap().with_sample_time(1e-12);
        for i in 0..f.grid.stages() {
            let y = on_path(&f.sc.path, f.grid.s(i), f.profile.x[i]);
            let out = ctl.step(0.0, &y).unwrap();
            let scale = f.profile.u[i].abs().max(1.0);
            assert!((out.u - f.profile.u[i]).abs() <= 1e-6 * scale, "stage {i}: {} vs {}", out.u, f.profile.u[i]);
            assert!(!out.infeasible && !out.excursion, "stage {i}");
            assert!(out.e.norm() < 1e-12 && out.ed.norm() < 1e-12);
        }
    }

    #[test]
    fn final_stage_brakes_to_rest() {
        let f = nominal_arm();
        let n = f.grid.stages();
        let mut ctl = ControllerState::topt(&f.sc.model, &f.sc.path, &f.grid, &f.sc.gains(), &f.sets).unwrap();
        let k = f.sets.get(n - 1).unwrap();
        for x in [0.0, 0.3 * k.hi, k.hi] {
            let out = ctl.step(0.0, &on_path(&f.sc.path, f.grid.s(n - 1), x)).unwrap();
            let expected = -x / (2.0 * f.grid.delta(n - 1));
            assert!((out.u - expected).abs() < 1e-6, "x {x}: {} vs {expected}", out.u);
            assert!(!out.infeasible);
        }
    }

    #[test]
    fn finished_path_holds() {
        let f = nominal_arm();
        let mut ctl = ControllerState::topt(&f.sc.model, &f.sc.path, &f.grid, &f.sc.gains(), &f.sets).unwrap();
        let out = ctl.step(0.0, &on_path(&f.sc.path, 1.0, 0.0)).unwrap();
        assert_eq!(out.u, 0.0);
        assert!(!out.infeasible);
    }

    #[test]
    fn computed_torque_matches_live_coefficients() {
        let f = nominal_arm();
        let model = f.sc.model.with_torque_limits(DVector::from_element(2, -1e9), DVector::from_element(2, 1e9)).unwrap();
        let ctl = ControllerState::topt(&model, &f.sc.path, &f.grid, &f.sc.gains(), &f.sets).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = rng.random_range(0.0..1.0);
            let x = rng.random_range(0.0..3.0);
            let u = rng.random_range(-20.0..20.0);
            let mut y = on_path(&f.sc.path, s, x);
            y.q += DVector::from_fn(2, |_, _| rng.random_range(-0.2..0.2));
            y.qd += DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let out = ctl.finish(&y, x, u, false, false).unwrap();
            let live = ctl.live_coefficients(&y).unwrap().torque(u, x);
            let scale = live.amax().max(1.0);
            assert!((&out.torque.raw - &live).amax() <= 1e-9 * scale, "{} vs {}", out.torque.raw, live);
            assert!(!out.torque.saturated());
        }
    }

    #[test]
    fn saturation_clamps_each_joint() {
        let f = nominal_arm();
        let y = on_path(&f.sc.path, 0.3, 2.0);
        let big = DVector::from_element(2, 1e3);
        let cmd = computed_torque(&f.sc.model, &y, &big, &DVector::zeros(2), &DVector::zeros(2), &f.sc.gains()).unwrap();
        assert!(cmd.saturated());
        for j in 0..2 {
            assert_eq!(cmd.applied[j], cmd.raw[j].clamp(f.sc.model.tau_min()[j], f.sc.model.tau_max()[j]));
            assert!(cmd.applied[j].abs() <= f.sc.model.tau_max()[j]);
        }
    }

    #[test]
    fn greatest_control_is_maximal_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut found = 0;
        for _ in 0..500 {
            let v = |rng: &mut ChaCha8Rng| DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let live = CoefficientTriple { a: v(&mut rng), b: v(&mut rng), c: v(&mut rng) };
            let (lo, hi) = (DVector::from_element(2, -5.0), DVector::from_element(2, 5.0));
            let x = rng.random_range(0.0..2.0);
            let target = Interval { lo: rng.random_range(0.0..1.0), hi: rng.random_range(1.0..3.0) };
            let landing = crate::reachability::landing_interval(x, &target, 0.01);
            let Some(u) = greatest_feasible_control(&live, &lo, &hi, x, &landing) else { continue };
            found += 1;
            let tau = live.torque(u, x);
            assert!(tau.iter().all(|t| t.abs() <= 5.0 + 1e-9) && landing.contains(u));
            // nothing above u is feasible
            let above = u + 1e-6 * u.abs().max(1.0);
            let tau = live.torque(above, x);
            assert!(!landing.contains(above) || tau.iter().any(|t| t.abs() > 5.0));
            // scaling torques and bounds together leaves the choice unchanged
            let k = rng.random_range(0.1..10.0);
            let scaled = CoefficientTriple { a: &live.a * k, b: &live.b * k, c: &live.c * k };
            let u2 = greatest_feasible_control(&scaled, &(&lo * k), &(&hi * k), x, &landing).unwrap();
            assert!((u - u2).abs() <= 1e-9 * u.abs().max(1.0));
        }
        assert!(found > 100);
    }

    #[test]
    fn tt_reference_starts_at_rest_and_is_differentiable() {
        let f = nominal_arm();
        let r = TtReference::new(&f.profile, &f.grid, &f.sc.path).unwrap();
        assert!((r.duration() - f.profile.duration).abs() < 1e-12);
        let start = r.eval(0.0).unwrap();
        assert_eq!((start.s, start.sd), (0.0, 0.0));
        assert_eq!(start.q, f.sc.path.point(0.0).unwrap().q);
        let end = r.eval(r.duration() + 1.0).unwrap();
        assert_eq!(end.s, 1.0);
        let h = 1e-6;
        for k in 1..40 {
            let t = r.duration() * k as f64 / 40.0;
            let (a, b, c) = (r.eval(t - h).unwrap(), r.eval(t).unwrap(), r.eval(t + h).unwrap());
            assert!(((c.s - a.s) / (2.0 * h) - b.sd).abs() < 1e-4);
            assert!(((&c.q - &a.q) / (2.0 * h) - &b.qd).amax() < 1e-4);
        }
    }

    #[test]
    fn tt_rejects_degenerate_profile() {
        let f = nominal_arm();
        let n = f.grid.stages();
        let still = VelocityProfile { x: vec![0.0; n + 1], u: vec![0.0; n], duration: f64::INFINITY, degenerate_stage: Some(0) };
        assert!(matches!(TtReference::new(&still, &f.grid, &f.sc.path), Err(Error::DegenerateProfile { stage: 0 })));
    }

    #[test]
    fn os_with_still_profile_commands_nothing() {
        let f = nominal_arm();
        let n = f.grid.stages();
        let still = VelocityProfile { x: vec![0.0; n + 1], u: vec![0.0; n], duration: f64::INFINITY, degenerate_stage: Some(0) };
        let mut ctl = ControllerState::online_scaling(&f.sc.model, &f.sc.path, &f.grid, &f.sc.gains(), &still, OS_DEFAULT_GAIN).unwrap();
        let out = ctl.step(0.0, &on_path(&f.sc.path, 0.0, 0.0)).unwrap();
        assert_eq!(out.u, 0.0);
        assert!(!out.infeasible);
    }

    #[test]
    fn os_follows_reference_on_path() {
        let f = nominal_arm();
        let mut ctl = ControllerState::online_scaling(&f.sc.model, &f.sc.path, &f.grid, &f.sc.gains(), &f.profile, OS_DEFAULT_GAIN).unwrap();
        for i in (0..f.grid.stages()).step_by(7) {
            let out = ctl.step(0.0, &on_path(&f.sc.path, f.grid.s(i), f.profile.x[i])).unwrap();
            assert!((out.u - f.profile.u[i]).abs() < 1e-6 * f.profile.u[i].abs().max(1.0), "stage {i}");
        }
    }

    #[test]
    fn interpolated_set_matches_grid_sets() {
        let f = nominal_arm();
        for i in 0..=f.grid.stages() {
            assert_eq!(interpolate_set(&f.sets, &f.grid, f.grid.s(i)), f.sets.get(i).unwrap());
        }
        let mid = interpolate_set(&f.sets, &f.grid, 0.5 * (f.grid.s(3) + f.grid.s(4)));
        let (a, b) = (f.sets.get(3).unwrap(), f.sets.get(4).unwrap());
        assert!((mid.hi - 0.5 * (a.hi + b.hi)).abs() < 1e-12);
    }

    #[test]
    fn constructors_check_dimensions() {
        let f = nominal_arm();
        let wrong = TrackingGains::critically_damped(3, 20.0);
        assert!(ControllerState::topt(&f.sc.model, &f.sc.path, &f.grid, &wrong, &f.sets).is_err());
        let coarse = DiscretizationGrid::uniform(10).unwrap();
        assert!(ControllerState::topt(&f.sc.model, &f.sc.path, &coarse, &f.sc.gains(), &f.sets).is_err());
        assert!(TrackingGains::new(DVector::from_element(2, 1.0), DVector::from_element(2, -1.0)).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
            assert_eq!(m.to_string(), m.name());
        }
        assert!("fast".parse::<Mode>().is_err());
    }
}
