//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DVector;
use toptrack::{DiscretizationGrid, DynamicsModel, Interval, Link, PathSpline, Waypoint};

pub fn wp(s: f64, q: &[f64]) -> Waypoint {
    Waypoint { s, q: q.to_vec() }
}

/// Pendulum under weak gravity on a curved single-joint path. The small
/// torque bounds keep every controllable set below `x ≈ 1.1`.
pub fn curved_pendulum() -> (DynamicsModel, PathSpline) {
    let link = Link { mass: 1.0, length: 0.5, com: 0.25, inertia: 0.02 };
    let model = DynamicsModel::pendulum(link, [0.0, -0.03, 0.0], 0.012).unwrap();
    let path = PathSpline::from_waypoints(&[wp(0.0, &[-1.0]), wp(0.4, &[-0.55]), wp(1.0, &[0.8])]).unwrap();
    (model, path)
}

/// Unit point mass on a straight line: `τ = s̈`, a double integrator.
pub fn double_integrator(u_max: f64) -> (DynamicsModel, PathSpline) {
    let link = Link { mass: 0.0, length: 1.0, com: 0.0, inertia: 1.0 };
    let model = DynamicsModel::pendulum(link, [0.0, 0.0, 0.0], u_max).unwrap();
    let path = PathSpline::from_waypoints(&[wp(0.0, &[0.0]), wp(1.0, &[1.0])]).unwrap();
    (model, path)
}

/// Brute-force controllable sets of a single-joint path by dynamic
/// programming over a `points × points` lattice in `(x, u)`.
///
/// The lattices are aligned so that `x + 2Δu` maps lattice points onto
/// lattice points: `x_k = k·h` on `[0, x_cap]` and `u_m = (m − points/2)·h/(2Δ)`.
/// Torques come straight from inverse dynamics, so the oracle shares no
/// coefficient code with the library. Returns `[lo, hi]` per stage.
///
/// Every lattice trajectory is a real one, so the result is an inner
/// approximation; its error grows by up to two lattice cells per stage.
pub fn dp_controllable_sets(
    model: &DynamicsModel,
    path: &PathSpline,
    grid: &DiscretizationGrid,
    terminal: Interval,
    x_cap: f64,
    points: usize,
) -> Vec<Option<Interval>> {
    let n = grid.stages();
    let h = x_cap / (points - 1) as f64;
    let half = (points / 2) as i64;
    let (tmin, tmax) = (model.tau_min()[0], model.tau_max()[0]);
    let xs: Vec<f64> = (0..points).map(|k| k as f64 * h).collect();

    let mut next: Vec<bool> = xs.iter().map(|&x| terminal.lo - 1e-12 <= x && x <= terminal.hi + 1e-12).collect();
    let mut out = vec![None; n + 1];
    out[n] = span(&next, &xs);
    for i in (0..n).rev() {
        let delta = grid.delta(i);
        let du = h / (2.0 * delta);
        let mut here = vec![false; points];
        for (k, &x) in xs.iter().enumerate() {
            let (t0, t1) = torque_affine(model, path, grid.s(i), x);
            here[k] = (0..points as i64).any(|m| {
                let k_next = k as i64 + m - half;
                if k_next < 0 || k_next >= points as i64 || !next[k_next as usize] {
                    return false;
                }
                let tau = t0 + t1 * ((m - half) as f64 * du);
                tmin <= tau && tau <= tmax
            });
        }
        out[i] = span(&here, &xs);
        if out[i].is_none() {
            break;
        }
        next = here;
    }
    out
}

/// Torque at stage point `s` as an affine function of `u` for squared
/// velocity `x`: returns `(τ(u = 0), ∂τ/∂u)`.
fn torque_affine(model: &DynamicsModel, path: &PathSpline, s: f64, x: f64) -> (f64, f64) {
    let pt = path.point(s).unwrap();
    let qd = &pt.dq * x.sqrt();
    let t0 = model.inverse_dynamics(&pt.q, &qd, &(&pt.ddq * x)).unwrap()[0];
    let t1 = model.inverse_dynamics(&pt.q, &qd, &(&pt.dq + &pt.ddq * x)).unwrap()[0] - t0;
    (t0, t1)
}

/// Brute-force one-step set of stage `i`: scans `points` states on
/// `[0, x_cap]` and, for each, `points` controls spanning the landing
/// interval into `target`.
pub fn dp_one_step(
    model: &DynamicsModel,
    path: &PathSpline,
    grid: &DiscretizationGrid,
    i: usize,
    target: Interval,
    x_cap: f64,
    points: usize,
) -> Option<Interval> {
    let h = x_cap / (points - 1) as f64;
    let delta = grid.delta(i);
    let (tmin, tmax) = (model.tau_min()[0], model.tau_max()[0]);
    let xs: Vec<f64> = (0..points).map(|k| k as f64 * h).collect();
    let member: Vec<bool> = xs
        .iter()
        .map(|&x| {
            let (t0, t1) = torque_affine(model, path, grid.s(i), x);
            let (ulo, uhi) = ((target.lo - x) / (2.0 * delta), (target.hi - x) / (2.0 * delta));
            (0..points).any(|m| {
                let u = ulo + (uhi - ulo) * m as f64 / (points - 1) as f64;
                let tau = t0 + t1 * u;
                tmin <= tau && tau <= tmax
            })
        })
        .collect();
    span(&member, &xs)
}

fn span(member: &[bool], xs: &[f64]) -> Option<Interval> {
    let lo = member.iter().position(|&b| b)?;
    let hi = member.iter().rposition(|&b| b)?;
    Some(Interval { lo: xs[lo], hi: xs[hi] })
}

pub fn vec1(x: f64) -> DVector<f64> {
    DVector::from_element(1, x)
}
