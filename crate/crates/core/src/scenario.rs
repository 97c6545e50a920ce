//! Experiment configuration and the end-to-end pipeline built on it.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::{ControllerState, Mode, TrackingGains, OS_DEFAULT_GAIN};
use crate::dynamics::{DynamicsModel, RobotConfig};
use crate::error::{Error, Result};
use crate::geometry::{PathConfig, PathSpline};
use crate::reachability::{
    compute_controllable_sets, greedy_forward_pass, terminal_from_velocity, ControllableSets, DiscretizationGrid,
    Interval, ReachOptions, StageConstraints, VelocityProfile,
};
use crate::sim::{simulate, CoupledState, SimOptions, SimResult};

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}
fn default_x_max() -> f64 {
    100.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_one() -> f64 {
    1.0
}
fn default_t_max() -> f64 {
    30.0
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_terminal() -> [f64; 2] {
    [0.0, 0.0]
}

/// On-disk scenario. Robot and path paths are resolved against the
/// directory holding the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub robot: PathBuf,
    pub path: PathBuf,
    /// Number of path stages N.
    pub stages: usize,
    /// Robust radius R.
    pub radius: f64,
    /// Natural frequency of the critically damped tracking gains (rad/s).
    pub omega: f64,
    /// Admissible terminal path velocity `[lo, hi]` (in ṡ, not ṡ²).
    #[serde(default = "default_terminal")]
    pub terminal_velocity: [f64; 2],
    /// Norm of the initial joint position error (rad).
    pub initial_error: f64,
    pub seed: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Mass scale of the simulated plant relative to the controller's model.
    #[serde(default = "default_one")]
    pub plant_mass_scale: f64,
    /// Largest initial error norm for which the TOPT runs stayed feasible
    /// across seeds, if calibrated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_radius: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.stages < 2 {
            return bad("stages must be at least 2");
        }
        if !(self.radius >= 0.0) {
            return bad("radius must be non-negative");
        }
        if !(self.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.initial_error >= 0.0) {
            return bad("initial error norm must be non-negative");
        }
        let [lo, hi] = self.terminal_velocity;
        if !(0.0 <= lo && lo <= hi) {
            return bad("terminal velocity must satisfy 0 <= lo <= hi");
        }
        if !(self.dt > 0.0 && self.t_max > 0.0 && self.x_max > 0.0 && self.plant_mass_scale > 0.0) {
            return bad("dt, t_max, x_max and plant_mass_scale must be positive");
        }
        Ok(())
    }
}

/// Scenarios bundled with the crate.
pub const SHIPPED: [&str; 2] = ["arm2", "pendulum"];

fn shipped_sources(name: &str) -> Option<(&'static str, &'static str, &'static str)> {
    match name {
        "arm2" => Some((
            include_str!("../scenarios/arm2.json"),
            include_str!("../scenarios/arm2_robot.json"),
            include_str!("../scenarios/arm2_path.json"),
        )),
        "pendulum" => Some((
            include_str!("../scenarios/pendulum.json"),
            include_str!("../scenarios/pendulum_robot.json"),
            include_str!("../scenarios/pendulum_path.json"),
        )),
        _ => None,
    }
}

/// Wall-clock split of a set computation.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub sets: ControllableSets,
    pub coefficient_time: Duration,
    pub recursion_time: Duration,
}

/// One row of a controller comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub mode: Mode,
    pub result: SimResult,
}

/// A loaded scenario: configuration plus the robot and path it names.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: DynamicsModel,
    pub path: PathSpline,
}

impl Scenario {
    pub fn load(config_path: impl AsRef<Path>) -> Result<Self> {
        let config_path = config_path.as_ref();
        let mut config = ScenarioConfig::from_json_str(&std::fs::read_to_string(config_path)?)?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        config.robot = base.join(&config.robot);
        config.path = base.join(&config.path);
        let robot = RobotConfig::from_json_file(&config.robot)?;
        let path = PathConfig::from_json_file(&config.path)?;
        Self::from_parts(config, &robot, &path)
    }

    /// One of [`SHIPPED`].
    pub fn shipped(name: &str) -> Result<Self> {
        let (config, robot, path) =
            shipped_sources(name).ok_or_else(|| Error::InvalidConfig(format!("no shipped scenario {name:?}")))?;
        Self::from_parts(
            ScenarioConfig::from_json_str(config)?,
            &RobotConfig::from_json_str(robot)?,
            &PathConfig::from_json_str(path)?,
        )
    }

    pub fn from_parts(config: ScenarioConfig, robot: &RobotConfig, path: &PathConfig) -> Result<Self> {
        config.validate()?;
        let model = robot.build()?;
        let path = path.build()?;
        if path.joint_count() != model.joint_count() {
            return Err(Error::DimensionMismatch { expected: model.joint_count(), got: path.joint_count() });
        }
        Ok(Self { config, model, path })
    }

    pub fn joint_count(&self) -> usize {
        self.model.joint_count()
    }

    pub fn grid(&self) -> DiscretizationGrid {
        DiscretizationGrid::uniform(self.config.stages).expect("validated stage count")
    }

    pub fn reach_options(&self) -> ReachOptions {
        ReachOptions { x_max: self.config.x_max, ..ReachOptions::default() }
    }

    pub fn gains(&self) -> TrackingGains {
        TrackingGains::critically_damped(self.joint_count(), self.config.omega)
    }

    pub fn terminal_set(&self) -> Interval {
        let [lo, hi] = self.config.terminal_velocity;
        terminal_from_velocity(Interval { lo, hi }).expect("validated terminal velocity")
    }

    pub fn sim_options(&self) -> SimOptions {
        let [lo, hi] = self.config.terminal_velocity;
        SimOptions {
            dt: self.config.dt,
            t_max: self.config.t_max,
            terminal_velocity: Interval { lo, hi },
            ..SimOptions::default()
        }
    }

    /// The simulated plant: the controller's model with scaled masses.
    pub fn plant(&self) -> DynamicsModel {
        if self.config.plant_mass_scale == 1.0 {
            self.model.clone()
        } else {
            self.model.with_mass_scale(self.config.plant_mass_scale)
        }
    }

    pub fn constraints(&self, radius: f64) -> Result<Vec<StageConstraints>> {
        StageConstraints::along_path(&self.model, &self.path, &self.grid(), radius)
    }

    /// Controllable sets at `radius`, timed.
    pub fn solve(&self, radius: f64) -> Result<SolveReport> {
        let start = Instant::now();
        let constraints = self.constraints(radius)?;
        let coefficient_time = start.elapsed();
        let start = Instant::now();
        let sets = compute_controllable_sets(&constraints, &self.grid(), self.terminal_set(), &self.reach_options())?;
        let recursion_time = start.elapsed();
        Ok(SolveReport { sets, coefficient_time, recursion_time })
    }

    pub fn sets(&self, radius: f64) -> Result<ControllableSets> {
        Ok(self.solve(radius)?.sets)
    }

    /// Nominal (`R = 0`) time-optimal profile from rest.
    pub fn nominal_profile(&self) -> Result<VelocityProfile> {
        let constraints = self.constraints(0.0)?;
        let grid = self.grid();
        let sets = compute_controllable_sets(&constraints, &grid, self.terminal_set(), &self.reach_options())?;
        if let Some(stage) = sets.first_empty {
            return Err(Error::InvalidConfig(format!("nominal problem infeasible: stage {stage} is empty")));
        }
        greedy_forward_pass(&constraints, &grid, &sets, 0.0)
    }

    /// Start at rest at `p(0) − e₀`, with `e₀` of norm `initial_error` along a
    /// direction drawn from `seed`.
    pub fn initial_state(&self, seed: u64) -> Result<CoupledState> {
        let n = self.joint_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = loop {
            let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let norm: f64 = v.norm();
            if norm > 1e-12 {
                break v / norm;
            }
        };
        let p0 = self.path.point(0.0)?.q;
        Ok(CoupledState::at_rest(p0 - dir * self.config.initial_error))
    }

    pub fn controller(
        &self,
        mode: Mode,
        sets: &ControllableSets,
        nominal: &VelocityProfile,
    ) -> Result<ControllerState> {
        let (model, path, grid, gains) = (&self.model, &self.path, &self.grid(), &self.gains());
        let controller = match mode {
            Mode::Topt => ControllerState::topt(model, path, grid, gains, sets),
            Mode::Os => ControllerState::online_scaling(model, path, grid, gains, nominal, OS_DEFAULT_GAIN),
            Mode::Tt => ControllerState::trajectory_tracking(model, path, grid, gains, nominal),
        }?;
        Ok(controller.with_sample_time(self.config.dt))
    }

    /// Simulates one controller from the seeded initial state.
    pub fn run(&self, mode: Mode, sets: &ControllableSets, nominal: &VelocityProfile, seed: u64) -> Result<SimResult> {
        let mut controller = self.controller(mode, sets, nominal)?;
        simulate(&self.plant(), &mut controller, &self.initial_state(seed)?, &self.sim_options())
    }

    /// Runs the configured modes concurrently from the same initial state.
    pub fn compare(&self, sets: &ControllableSets, nominal: &VelocityProfile) -> Result<Vec<CompareRow>> {
        let seed = self.config.seed;
        std::thread::scope(|scope| {
            let handles: Vec<_> = self
                .config
                .modes
                .iter()
                .map(|&mode| scope.spawn(move || self.run(mode, sets, nominal, seed).map(|result| CompareRow { mode, result })))
                .collect();
            handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
        })
    }
}
