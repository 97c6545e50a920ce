//! Closed-loop simulation of the manipulator coupled with the path
//! parameterization, under zero-order-hold torque and path acceleration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::ControllerState;
use crate::dynamics::DynamicsModel;
use crate::error::{Error, Result};
use crate::integrator::Dopri5;
use crate::reachability::Interval;

/// Coupled state `y = (q, q̇, s, ṡ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub s: f64,
    pub sd: f64,
}

impl CoupledState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self { q, qd: DVector::zeros(n), s: 0.0, sd: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Control sample time (s).
    pub dt: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Abort when `‖(e, ė)‖` exceeds this.
    pub divergence: f64,
    /// Abort when the run takes longer than this (s).
    pub t_max: f64,
    /// Admissible terminal path velocities `I_end`.
    pub terminal_velocity: Interval,
    /// Tolerance on `√x` at the end.
    pub terminal_tol: f64,
    /// A path that stops within this distance of `s = 1` counts as arrived.
    pub arrival_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            rtol: 1e-8,
            atol: 1e-10,
            divergence: 10.0,
            t_max: 30.0,
            terminal_velocity: Interval::point(0.0),
            terminal_tol: 1e-3,
            arrival_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Reached,
    /// Arrived at `s = 1` outside the terminal velocity set.
    Infeasible,
    Diverged,
    TimedOut,
}

/// One recorded control sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub u: f64,
    pub tau: DVector<f64>,
    /// `‖e‖₂`, joint position error.
    pub err_norm: f64,
    /// `‖(e, ė)‖₂`.
    pub state_err_norm: f64,
    pub infeasible: bool,
    pub excursion: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub samples: Vec<Sample>,
    pub states: Vec<CoupledState>,
    pub status: TerminalStatus,
    pub duration: f64,
}

impl SimResult {
    pub fn max_err_norm(&self) -> f64 {
        self.samples.iter().map(|s| s.err_norm).fold(0.0, f64::max)
    }

    pub fn infeasible_count(&self) -> usize {
        self.samples.iter().filter(|s| s.infeasible).count()
    }

    pub fn excursion_count(&self) -> usize {
        self.samples.iter().filter(|s| s.excursion).count()
    }

    pub fn final_state(&self) -> &CoupledState {
        self.states.last().expect("at least one state")
    }
}

/// `(q̇, q̈)` of the plant under torque `tau`.
pub fn plant_derivative(plant: &DynamicsModel, q: &DVector<f64>, qd: &DVector<f64>, tau: &DVector<f64>) -> Result<DVector<f64>> {
    let n = q.len();
    let qdd = plant.forward_dynamics(q, qd, tau)?;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(qd);
    out.rows_mut(n, n).copy_from(&qdd);
    Ok(out)
}

/// Time until the path, moving with constant acceleration `u` from
/// `(s, ṡ)`, first reaches `s = 1`; `None` if it stops first or never does.
fn time_to_end(s: f64, sd: f64, u: f64) -> Option<f64> {
    let d = 1.0 - s;
    if d <= 0.0 {
        return Some(0.0);
    }
    // ½u t² + ṡ t − d = 0
    if u == 0.0 {
        return (sd > 0.0).then(|| d / sd);
    }
    let disc = sd * sd + 2.0 * u * d;
    if disc < 0.0 {
        return None;
    }
    // stable smaller positive root: t = 2d / (ṡ + √disc)
    let denom = sd + disc.sqrt();
    (denom > 0.0).then(|| 2.0 * d / denom)
}

/// Runs `controller` against `plant` from `y0` until the path ends, the
/// tracking error diverges, or `t_max` elapses.
pub fn simulate(
    plant: &DynamicsModel,
    controller: &mut ControllerState,
    y0: &CoupledState,
    opts: &SimOptions,
) -> Result<SimResult> {
    let n = plant.joint_count();
    if y0.q.len() != n || y0.qd.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y0.q.len() });
    }
    if y0.s != 0.0 || !(y0.sd >= 0.0) || !(opts.dt > 0.0) {
        return Err(Error::InvalidConfig("simulation needs s0 = 0, sd0 >= 0 and dt > 0".into()));
    }
    let mut ode = Dopri5::new(opts.rtol, opts.atol);
    let mut y = y0.clone();
    let mut t = 0.0;
    let mut samples = Vec::new();
    let mut states = Vec::new();

    let status = loop {
        let out = controller.step(t, &y)?;
        if let Some((s, sd)) = out.path_state {
            y.s = s;
            y.sd = sd;
        }
        let state_err = (out.e.norm_squared() + out.ed.norm_squared()).sqrt();
        samples.push(Sample {
            t,
            s: y.s,
            x: y.sd * y.sd,
            u: out.u,
            tau: out.torque.applied.clone(),
            err_norm: out.e.norm(),
            state_err_norm: state_err,
            infeasible: out.infeasible,
            excursion: out.excursion,
        });
        states.push(y.clone());

        if y.s >= 1.0 {
            let ok = opts.terminal_velocity.lo - opts.terminal_tol <= y.sd && y.sd <= opts.terminal_velocity.hi + opts.terminal_tol;
            break if ok { TerminalStatus::Reached } else { TerminalStatus::Infeasible };
        }
        if !(state_err <= opts.divergence) {
            break TerminalStatus::Diverged;
        }
        if t >= opts.t_max {
            break TerminalStatus::TimedOut;
        }

        // the path cannot run backwards
        let u = if y.sd <= 0.0 { out.u.max(0.0) } else { out.u };
        let mut h = opts.dt;
        let mut ends = false;
        if let Some(te) = time_to_end(y.s, y.sd, u) {
            if te <= h {
                h = te;
                ends = true;
            }
        }
        let mut stops = false;
        if u < 0.0 && y.sd / -u <= h {
            h = y.sd / -u;
            stops = true;
            ends = false;
        }

        let tau = out.torque.applied;
        let robot0 = {
            let mut v = DVector::zeros(2 * n);
            v.rows_mut(0, n).copy_from(&y.q);
            v.rows_mut(n, n).copy_from(&y.qd);
            v
        };
        let mut failure = None;
        let robot1 = ode.integrate(
            |_, v| {
                let q = v.rows(0, n).into_owned();
                let qd = v.rows(n, n).into_owned();
                plant_derivative(plant, &q, &qd, &tau).unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    DVector::from_element(2 * n, f64::NAN)
                })
            },
            t,
            &robot0,
            t + h,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let robot1 = robot1?;
        y.q = robot1.rows(0, n).into_owned();
        y.qd = robot1.rows(n, n).into_owned();
        y.s += y.sd * h + 0.5 * u * h * h;
        y.sd = (y.sd + u * h).max(0.0);
        t += h;
        if ends {
            y.s = 1.0;
        } else if stops {
            y.sd = 0.0;
            if 1.0 - y.s <= opts.arrival_tol {
                y.s = 1.0;
            }
        }
        y.s = y.s.min(1.0);
    };

    Ok(SimResult { samples, states, status, duration: t })
}

/// Exponential envelope `K e^{−λt}` fitted to an error series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub k: f64,
    pub lambda: f64,
}

/// Fits `log ‖(e, ė)‖` against time over the pre-convergence window: from
/// the peak error until the error first falls below [`CONVERGED`] of the
/// peak. Later samples sit on the sampling-error floor and would flatten the
/// slope. All-zero errors give `λ = +∞`.
pub fn exponential_decay_fit(result: &SimResult) -> Result<DecayFit> {
    let t: Vec<f64> = result.samples.iter().map(|s| s.t).collect();
    let e: Vec<f64> = result.samples.iter().map(|s| s.state_err_norm).collect();
    fit_decay(&t, &e)
}

/// Fraction of the peak error at which the decay counts as converged.
pub const CONVERGED: f64 = 1e-2;

pub fn fit_decay(t: &[f64], err: &[f64]) -> Result<DecayFit> {
    if t.len() != err.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), got: err.len() });
    }
    if err.iter().all(|&e| e == 0.0) {
        return Ok(DecayFit { k: 0.0, lambda: f64::INFINITY });
    }
    let (peak_idx, peak) = err
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    let floor = peak * CONVERGED;
    let end = (peak_idx..err.len()).find(|&i| err[i] < floor).unwrap_or(err.len() - 1);
    let window: Vec<(f64, f64)> = (peak_idx..=end).filter(|&i| err[i] > 0.0).map(|i| (t[i], err[i].ln())).collect();
    if window.len() < 10 {
        return Err(Error::InvalidConfig(format!("need at least 10 positive samples, got {}", window.len())));
    }
    let m = window.len() as f64;
    let tm = window.iter().map(|w| w.0).sum::<f64>() / m;
    let lm = window.iter().map(|w| w.1).sum::<f64>() / m;
    let stt: f64 = window.iter().map(|w| (w.0 - tm).powi(2)).sum();
    let stl: f64 = window.iter().map(|w| (w.0 - tm) * (w.1 - lm)).sum();
    let slope = if stt > 0.0 { stl / stt } else { 0.0 };
    let intercept = lm - slope * tm;
    let lift = window.iter().map(|w| w.1 - (intercept + slope * w.0)).fold(0.0, f64::max);
    Ok(DecayFit { k: (intercept + lift).exp(), lambda: -slope })
}
