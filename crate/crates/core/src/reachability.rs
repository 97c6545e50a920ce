//! Robust controllable sets over a discretized path.
//!
//! Each stage carries nominal torque coefficients `(a, b, c)` per joint and a
//! perturbation radius `R`. A pair `(u, x)` is robust feasible when every
//! realization `(a+Δa)u + (b+Δb)x + (c+Δc)` with `‖(Δa, Δb, Δc)‖₂ ≤ R` stays
//! inside the torque bounds, which is the conic constraint
//! `(a, b, c)·(u, x, 1) + R‖(u, x, 1)‖₂ ≤ τ_max` (and its mirror for `τ_min`).
//! For fixed `x` every such constraint cuts out a closed interval of `u`,
//! solved here in closed form. The feasible `(x, u)` region is convex, so the
//! one-step set is an interval whose endpoints are found by bisection.

use nalgebra::DVector;

use crate::dynamics::{CoefficientTriple, DynamicsModel};
use crate::error::{Error, Result};
use crate::geometry::PathSpline;

/// Closed interval `[lo, hi]`; endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ALL: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    /// `None` when `lo > hi` or either end is NaN.
    pub fn new(lo: f64, hi: f64) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Nearest point of the interval to `x`.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Grid points `0 = s_0 < … < s_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationGrid {
    s: Vec<f64>,
}

impl DiscretizationGrid {
    pub fn uniform(stages: usize) -> Result<Self> {
        if stages == 0 {
            return Err(Error::InvalidConfig("stage count must be positive".into()));
        }
        let mut s: Vec<f64> = (0..=stages).map(|i| i as f64 / stages as f64).collect();
        s[stages] = 1.0;
        Ok(Self { s })
    }

    pub fn from_points(s: Vec<f64>) -> Result<Self> {
        if s.len() < 2 || s[0] != 0.0 || s[s.len() - 1] != 1.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("grid must increase strictly from 0 to 1".into()));
        }
        Ok(Self { s })
    }

    /// Number of stages `N`.
    pub fn stages(&self) -> usize {
        self.s.len() - 1
    }

    pub fn points(&self) -> &[f64] {
        &self.s
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s[i]
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.s[i + 1] - self.s[i]
    }

    /// Stage containing `s`, clamped to `0..N`.
    pub fn stage_of(&self, s: f64) -> usize {
        self.s.partition_point(|&g| g <= s).saturating_sub(1).min(self.stages() - 1)
    }
}

/// Discrete transition `x_{i+1} = x_i + 2Δ_i u_i`.
pub fn transition(x: f64, u: f64, delta: f64) -> f64 {
    x + 2.0 * delta * u
}

/// Torque constraints of one stage under perturbations of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConstraints {
    pub coeffs: CoefficientTriple,
    pub radius: f64,
    pub tau_min: DVector<f64>,
    pub tau_max: DVector<f64>,
}

impl StageConstraints {
    pub fn new(coeffs: CoefficientTriple, radius: f64, tau_min: DVector<f64>, tau_max: DVector<f64>) -> Result<Self> {
        let n = coeffs.joint_count();
        for v in [&coeffs.b, &coeffs.c, &tau_min, &tau_max] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidConfig(format!("perturbation radius {radius} must be finite and >= 0")));
        }
        if !coeffs.is_finite() {
            return Err(Error::InvalidConfig("non-finite stage coefficients".into()));
        }
        Ok(Self { coeffs, radius, tau_min, tau_max })
    }

    /// Nominal constraints at `s_0 … s_{N-1}` for `model` along `path`.
    pub fn along_path(
        model: &DynamicsModel,
        path: &PathSpline,
        grid: &DiscretizationGrid,
        radius: f64,
    ) -> Result<Vec<StageConstraints>> {
        (0..grid.stages())
            .map(|i| {
                let coeffs = model.nominal_coefficients(path, grid.s(i))?;
                StageConstraints::new(coeffs, radius, model.tau_min().clone(), model.tau_max().clone())
            })
            .collect()
    }

    pub fn with_radius(&self, radius: f64) -> Self {
        Self { radius, ..self.clone() }
    }

    pub fn joint_count(&self) -> usize {
        self.coeffs.joint_count()
    }
}

/// Solves `R·√(u² + k2) ≤ β − a·u` for `u`, with `k2 > 0`.
fn cone_interval(a: f64, beta: f64, r: f64, k2: f64) -> Option<Interval> {
    if r == 0.0 {
        return if a > 0.0 {
            Some(Interval { lo: f64::NEG_INFINITY, hi: beta / a })
        } else if a < 0.0 {
            Some(Interval { lo: beta / a, hi: f64::INFINITY })
        } else if beta >= 0.0 {
            Some(Interval::ALL)
        } else {
            None
        };
    }
    // Squaring gives q(u) = (R² − a²)u² + 2aβu + R²k2 − β² ≤ 0, valid on the
    // branch β − a·u ≥ 0. Every point of the wanted set has β − a·u ≥ R·√k2.
    let qa = r * r - a * a;
    let qb = 2.0 * a * beta;
    let qc = r * r * k2 - beta * beta;
    if qa == 0.0 {
        if beta <= 0.0 {
            return None;
        }
        let root = -qc / qb;
        return if a > 0.0 {
            Some(Interval { lo: f64::NEG_INFINITY, hi: root })
        } else {
            Some(Interval { lo: root, hi: f64::INFINITY })
        };
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let (r1, r2) = stable_roots(qa, qb, qc, disc);
    if qa > 0.0 {
        // bounded: the whole root interval lies on one branch
        let mid = 0.5 * (r1 + r2);
        (beta - a * mid >= 0.0).then_some(Interval { lo: r1, hi: r2 })
    } else {
        // unbounded on the side where β − a·u grows
        let root = if beta - a * r1 >= beta - a * r2 { r1 } else { r2 };
        if a > 0.0 {
            Some(Interval { lo: f64::NEG_INFINITY, hi: root })
        } else {
            Some(Interval { lo: root, hi: f64::INFINITY })
        }
    }
}

fn stable_roots(qa: f64, qb: f64, qc: f64, disc: f64) -> (f64, f64) {
    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
    if q == 0.0 {
        return (0.0, 0.0);
    }
    let (x1, x2) = (q / qa, qc / q);
    (x1.min(x2), x1.max(x2))
}

/// Path accelerations `u` that satisfy every realization of the stage's
/// torque constraints at squared velocity `x`. `None` when no such `u` exists.
pub fn robust_u_interval(stage: &StageConstraints, x: f64) -> Option<Interval> {
    let k2 = x * x + 1.0;
    let CoefficientTriple { a, b, c } = &stage.coeffs;
    let mut out = Interval::ALL;
    for j in 0..stage.joint_count() {
        let upper = cone_interval(a[j], stage.tau_max[j] - b[j] * x - c[j], stage.radius, k2)?;
        let lower = cone_interval(-a[j], b[j] * x + c[j] - stage.tau_min[j], stage.radius, k2)?;
        out = out.intersect(&upper)?.intersect(&lower)?;
    }
    Some(out)
}

/// Controls that keep torques inside bounds for the given (measured)
/// coefficients at squared velocity `x`: the `R = 0` version of
/// [`robust_u_interval`] with the coefficients taken as exact.
pub fn live_u_interval(coeffs: &CoefficientTriple, tau_min: &DVector<f64>, tau_max: &DVector<f64>, x: f64) -> Option<Interval> {
    let mut out = Interval::ALL;
    for j in 0..coeffs.joint_count() {
        let rest = coeffs.b[j] * x + coeffs.c[j];
        let upper = cone_interval(coeffs.a[j], tau_max[j] - rest, 0.0, 1.0)?;
        let lower = cone_interval(-coeffs.a[j], rest - tau_min[j], 0.0, 1.0)?;
        out = out.intersect(&upper)?.intersect(&lower)?;
    }
    Some(out)
}

/// Controls steering `x` into `target` over a stage of length `delta`.
pub fn landing_interval(x: f64, target: &Interval, delta: f64) -> Interval {
    Interval { lo: (target.lo - x) / (2.0 * delta), hi: (target.hi - x) / (2.0 * delta) }
}

/// Robust feasible controls at `x` that land in `target`.
pub fn controls_into(stage: &StageConstraints, x: f64, target: &Interval, delta: f64) -> Option<Interval> {
    robust_u_interval(stage, x)?.intersect(&landing_interval(x, target, delta))
}

/// Numerical settings for the set computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachOptions {
    /// Ceiling on squared path velocity; keeps the bisection bracket finite.
    pub x_max: f64,
    /// Absolute bisection tolerance on set endpoints.
    pub tol: f64,
}

impl Default for ReachOptions {
    fn default() -> Self {
        Self { x_max: 100.0, tol: 1e-10 }
    }
}

const SEED_SCAN: usize = 32;
const GOLDEN_ITERS: usize = 120;

/// Robust one-step set `Q_i(target)`: states in `[0, x_max]` with a robust
/// feasible control landing in `target`.
///
/// Endpoints are returned on the feasible side of the bisection bracket, so
/// every returned state is feasible.
pub fn robust_one_step_set(
    stage: &StageConstraints,
    target: Option<Interval>,
    delta: f64,
    opts: &ReachOptions,
) -> Option<Interval> {
    let target = target?.intersect(&Interval { lo: 0.0, hi: f64::INFINITY })?;
    let feasible = |x: f64| controls_into(stage, x, &target, delta).is_some();
    let seed = find_seed(stage, &target, delta, opts, &feasible)?;

    let lo = if feasible(0.0) { 0.0 } else { bisect(0.0, seed, opts.tol, &feasible) };
    let hi = if feasible(opts.x_max) { opts.x_max } else { bisect(opts.x_max, seed, opts.tol, &feasible) };
    Interval::new(lo, hi)
}

/// Bisects between an infeasible `out` and a feasible `inside`; returns the
/// last feasible point.
fn bisect(mut out: f64, mut inside: f64, tol: f64, feasible: &impl Fn(f64) -> bool) -> f64 {
    while (out - inside).abs() > tol {
        let mid = 0.5 * (out + inside);
        if mid == out || mid == inside {
            break;
        }
        if feasible(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    inside
}

fn find_seed(
    stage: &StageConstraints,
    target: &Interval,
    delta: f64,
    opts: &ReachOptions,
    feasible: &impl Fn(f64) -> bool,
) -> Option<f64> {
    let x_max = opts.x_max;
    let t_hi = target.hi.min(x_max);
    let mut candidates = vec![0.0, target.lo.min(x_max), t_hi, 0.5 * (target.lo.min(x_max) + t_hi), x_max];
    candidates.extend((1..SEED_SCAN).map(|k| x_max * k as f64 / SEED_SCAN as f64));
    if let Some(&x) = candidates.iter().find(|&&x| feasible(x)) {
        return Some(x);
    }
    // Thin feasible region: minimize the convex worst-violation function.
    let x = golden_min(0.0, x_max, |x| worst_violation(stage, x, target, delta));
    feasible(x).then_some(x)
}

/// `min_u max_k g_k(x, u)` over controls landing in `target`, where `g_k ≤ 0`
/// are the robust torque constraints. Jointly convex in `(x, u)`, so this is
/// convex in `x`.
fn worst_violation(stage: &StageConstraints, x: f64, target: &Interval, delta: f64) -> f64 {
    let land = landing_interval(x, target, delta);
    let g = |u: f64| {
        let norm = (u * u + x * x + 1.0).sqrt();
        let tau = stage.coeffs.torque(u, x);
        (0..stage.joint_count())
            .map(|j| {
                let up = tau[j] + stage.radius * norm - stage.tau_max[j];
                let down = stage.tau_min[j] - tau[j] + stage.radius * norm;
                up.max(down)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if land.width() <= 0.0 {
        return g(land.lo);
    }
    let u = golden_min(land.lo, land.hi, g);
    g(u)
}

fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Squared-velocity terminal set `{x : √x ∈ velocity}` from a path-velocity
/// interval.
pub fn terminal_from_velocity(velocity: Interval) -> Result<Interval> {
    if velocity.lo < 0.0 {
        return Err(Error::InvalidConfig("terminal velocity interval must be non-negative".into()));
    }
    Ok(Interval { lo: velocity.lo * velocity.lo, hi: velocity.hi * velocity.hi })
}

/// Robust controllable sets `K_0 … K_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllableSets {
    pub sets: Vec<Option<Interval>>,
    /// Highest stage index whose set came out empty (earlier ones are empty too).
    pub first_empty: Option<usize>,
}

impl ControllableSets {
    pub fn is_feasible(&self) -> bool {
        self.first_empty.is_none()
    }

    pub fn stages(&self) -> usize {
        self.sets.len() - 1
    }

    pub fn get(&self, i: usize) -> Option<Interval> {
        self.sets[i]
    }

    pub fn terminal(&self) -> Option<Interval> {
        self.sets[self.sets.len() - 1]
    }
}

/// Backward recursion `K_N = X_f`, `K_i = Q_i(K_{i+1})`.
pub fn compute_controllable_sets(
    constraints: &[StageConstraints],
    grid: &DiscretizationGrid,
    terminal: Interval,
    opts: &ReachOptions,
) -> Result<ControllableSets> {
    let n = grid.stages();
    if constraints.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: constraints.len() });
    }
    if terminal.lo < 0.0 {
        return Err(Error::InvalidConfig("terminal set must lie in [0, inf)".into()));
    }
    let mut sets = vec![None; n + 1];
    sets[n] = terminal.intersect(&Interval { lo: 0.0, hi: opts.x_max });
    let mut first_empty = sets[n].is_none().then_some(n);
    for i in (0..n).rev() {
        if first_empty.is_some() {
            break;
        }
        sets[i] = robust_one_step_set(&constraints[i], sets[i + 1], grid.delta(i), opts);
        if sets[i].is_none() {
            first_empty = Some(i);
        }
    }
    Ok(ControllableSets { sets, first_empty })
}

/// Squared-velocity profile from the greedy forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `Σ 2Δ_i / (√x_i + √x_{i+1})`; infinite for a degenerate profile.
    pub duration: f64,
    /// First stage with `x_i = x_{i+1} = 0`, if any.
    pub degenerate_stage: Option<usize>,
}

impl VelocityProfile {
    /// Stage start times `t_0 = 0, …, t_N = duration`.
    pub fn stage_times(&self, grid: &DiscretizationGrid) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.x.len());
        t.push(0.0);
        for i in 0..self.u.len() {
            t.push(t[i] + stage_duration(self.x[i], self.x[i + 1], grid.delta(i)));
        }
        t
    }
}

fn stage_duration(x0: f64, x1: f64, delta: f64) -> f64 {
    let speed = x0.max(0.0).sqrt() + x1.max(0.0).sqrt();
    if speed == 0.0 {
        f64::INFINITY
    } else {
        2.0 * delta / speed
    }
}

/// Greedy forward pass: at every stage take the greatest robust feasible
/// control that lands in the next controllable set.
pub fn greedy_forward_pass(
    constraints: &[StageConstraints],
    grid: &DiscretizationGrid,
    sets: &ControllableSets,
    x_start: f64,
) -> Result<VelocityProfile> {
    let n = grid.stages();
    if constraints.len() != n || sets.stages() != n {
        return Err(Error::DimensionMismatch { expected: n, got: constraints.len().min(sets.stages()) });
    }
    match sets.get(0) {
        Some(k0) if k0.contains(x_start) => {}
        _ => return Err(Error::StartOutsideSet { x: x_start }),
    }
    let mut x = vec![x_start];
    let mut u = Vec::with_capacity(n);
    for i in 0..n {
        let next = sets.get(i + 1).ok_or(Error::StartOutsideSet { x: x[i] })?;
        let controls = controls_into(&constraints[i], x[i], &next, grid.delta(i))
            .ok_or_else(|| Error::InvalidConfig(format!("no feasible control at stage {i}")))?;
        let x_next = next.clamp(transition(x[i], controls.hi, grid.delta(i)));
        u.push(controls.hi);
        x.push(x_next);
    }
    let mut duration = 0.0;
    let mut degenerate_stage = None;
    for i in 0..n {
        let dt = stage_duration(x[i], x[i + 1], grid.delta(i));
        if dt.is_infinite() && degenerate_stage.is_none() {
            degenerate_stage = Some(i);
        }
        duration += dt;
    }
    Ok(VelocityProfile { x, u, duration, degenerate_stage })
}

/// Controllable sets followed by the greedy forward pass from `x_start`.
/// With `R = 0` constraints this is the nominal time-optimal parameterization.
pub fn solve_nominal_parameterization(
    constraints: &[StageConstraints],
    grid: &DiscretizationGrid,
    terminal: Interval,
    x_start: f64,
    opts: &ReachOptions,
) -> Result<(ControllableSets, VelocityProfile)> {
    let sets = compute_controllable_sets(constraints, grid, terminal, opts)?;
    let profile = greedy_forward_pass(constraints, grid, &sets, x_start)?;
    Ok((sets, profile))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(a: f64, b: f64, c: f64, r: f64, lo: f64, hi: f64) -> StageConstraints {
        let v = |x: f64| DVector::from_element(1, x);
        StageConstraints::new(CoefficientTriple { a: v(a), b: v(b), c: v(c) }, r, v(lo), v(hi)).unwrap()
    }

    #[test]
    fn transition_examples() {
        assert_eq!(transition(0.7, 0.0, 0.3), 0.7);
        assert!((transition(1.0, 2.0, 0.01) - 1.04).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let (x, u, d) = (rng.random_range(0.0..5.0), rng.random_range(-9.0..9.0), rng.random_range(1e-3..0.5));
            assert!((transition(transition(x, u, d), -u, d) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_case_interval() {
        let st = single(1.0, 0.0, 0.0, 0.0, -10.0, 10.0);
        for x in [0.0, 1.0, 50.0] {
            assert_eq!(robust_u_interval(&st, x), Some(Interval { lo: -10.0, hi: 10.0 }));
        }
    }

    #[test]
    fn conic_upper_limit_matches_algebra() {
        // √(u² + 1) ≤ 10 − u  ⟺  20u ≤ 99
        let st = single(1.0, 0.0, 0.0, 1.0, -1e9, 10.0);
        let iv = robust_u_interval(&st, 0.0).unwrap();
        assert!((iv.hi - 4.95).abs() < 1e-12, "{iv:?}");
    }

    #[test]
    fn cone_interval_cases() {
        // |a| < R: bounded or empty
        let iv = cone_interval(0.5, 10.0, 1.0, 1.0).unwrap();
        assert!(iv.lo.is_finite() && iv.hi.is_finite());
        assert!(cone_interval(0.5, 0.5, 1.0, 1.0).is_none());
        // |a| = R
        let iv = cone_interval(1.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(iv.lo, f64::NEG_INFINITY);
        assert!((iv.hi - 4.95).abs() < 1e-12);
        assert!(cone_interval(-1.0, -1.0, 1.0, 1.0).is_none());
        // |a| > R, negative slope mirrors positive
        let p = cone_interval(2.0, 3.0, 0.5, 2.0).unwrap();
        let m = cone_interval(-2.0, 3.0, 0.5, 2.0).unwrap();
        assert!((p.hi + m.lo).abs() < 1e-12);
        // a = 0 with R > 0 is a bounded symmetric interval
        let z = cone_interval(0.0, 5.0, 1.0, 1.0).unwrap();
        assert!((z.lo + z.hi).abs() < 1e-12 && (z.hi - 24f64.sqrt()).abs() < 1e-12);
        // double root is kept as a closed point
        let d = cone_interval(0.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(d, Interval::point(0.0));
    }

    #[test]
    fn robust_interval_is_sound_under_sampled_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = rng.random_range(0.0..1.0);
            let a = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
            let b = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let c = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let st = StageConstraints::new(CoefficientTriple { a, b, c }, r, DVector::from_element(2, -12.0), DVector::from_element(2, 12.0)).unwrap();
            let x = rng.random_range(0.0..4.0);
            let Some(iv) = robust_u_interval(&st, x) else { continue };
            for _ in 0..20 {
                let u = if iv.lo.is_finite() && iv.hi.is_finite() { rng.random_range(iv.lo..=iv.hi) } else { iv.clamp(0.0) };
                let norm = (u * u + x * x + 1.0).sqrt();
                for j in 0..2 {
                    let nominal = st.coeffs.a[j] * u + st.coeffs.b[j] * x + st.coeffs.c[j];
                    assert!(nominal + r * norm <= 12.0 + 1e-9);
                    assert!(nominal - r * norm >= -12.0 - 1e-9);
                }
            }
        }
    }

    #[test]
    fn one_step_set_of_rest_point() {
        let st = single(1.0, 0.0, 0.0, 0.0, -1.0, 1.0);
        let q = robust_one_step_set(&st, Some(Interval::point(0.0)), 0.5, &ReachOptions::default()).unwrap();
        assert_eq!(q.lo, 0.0);
        assert!((q.hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_step_set_shrinks_with_radius() {
        let st = single(0.8, -0.3, 0.4, 0.0, -3.0, 3.0);
        let target = Some(Interval { lo: 0.5, hi: 2.0 });
        let opts = ReachOptions::default();
        let nominal = robust_one_step_set(&st, target, 0.05, &opts).unwrap();
        let robust = robust_one_step_set(&st.with_radius(0.5), target, 0.05, &opts).unwrap();
        assert!(robust.is_subset_of(&nominal), "{robust:?} vs {nominal:?}");
        assert!(robust.width() < nominal.width());
    }

    #[test]
    fn empty_target_gives_empty_set() {
        let st = single(1.0, 0.0, 0.0, 0.0, -1.0, 1.0);
        assert!(robust_one_step_set(&st, None, 0.1, &ReachOptions::default()).is_none());
    }

    #[test]
    fn thin_feasible_region_found_by_golden_search() {
        // τ = 50.3 − x must stay in [−0.01, 0.01] ⇒ x ∈ [50.29, 50.31],
        // which falls between the seed scan points
        let st = single(0.0, -1.0, 50.3, 0.0, -0.01, 0.01);
        let q = robust_one_step_set(&st, Some(Interval { lo: 0.0, hi: 100.0 }), 0.01, &ReachOptions::default()).unwrap();
        assert!((q.lo - 50.29).abs() < 1e-8 && (q.hi - 50.31).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn infeasible_flag_when_bounds_too_tight() {
        // constant load of 2 with bounds ±1 and no authority through u
        let st = single(0.0, 0.0, 2.0, 0.0, -1.0, 1.0);
        let grid = DiscretizationGrid::uniform(4).unwrap();
        let sets = compute_controllable_sets(&vec![st; 4], &grid, Interval::point(0.0), &ReachOptions::default()).unwrap();
        assert!(!sets.is_feasible());
        assert_eq!(sets.first_empty, Some(3));
        assert!(sets.sets[..4].iter().all(Option::is_none));
    }

    #[test]
    fn double_integrator_profile_is_bang_bang() {
        let u_max = 4.0;
        let st = single(1.0, 0.0, 0.0, 0.0, -u_max, u_max);
        let grid = DiscretizationGrid::uniform(100).unwrap();
        let (_, profile) = solve_nominal_parameterization(&vec![st; 100], &grid, Interval::point(0.0), 0.0, &ReachOptions::default()).unwrap();
        let exact = 2.0 * (1.0 / u_max).sqrt();
        assert!((profile.duration - exact).abs() / exact < 0.02);
        assert!(profile.u[..50].iter().all(|&u| (u - u_max).abs() < 1e-6));
        assert!(profile.u[50..].iter().all(|&u| (u + u_max).abs() < 1e-6));
    }

    #[test]
    fn start_outside_k0_is_rejected() {
        let st = single(1.0, 0.0, 0.0, 0.0, -1.0, 1.0);
        let grid = DiscretizationGrid::uniform(10).unwrap();
        let err = solve_nominal_parameterization(&vec![st; 10], &grid, Interval::point(0.0), 50.0, &ReachOptions::default());
        assert!(matches!(err, Err(Error::StartOutsideSet { .. })));
    }

    #[test]
    fn stage_lookup() {
        let grid = DiscretizationGrid::uniform(100).unwrap();
        assert_eq!(grid.stage_of(0.0), 0);
        assert_eq!(grid.stage_of(0.015), 1);
        assert_eq!(grid.stage_of(0.02), 2);
        assert_eq!(grid.stage_of(1.0), 99);
        assert!(DiscretizationGrid::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }
}
