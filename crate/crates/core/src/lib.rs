//! Robust time-optimal path tracking for rigid manipulators.
//!
//! Offline, [`reachability`] computes robust controllable sets of the
//! squared path velocity along a discretized path. Online, [`control`]
//! selects the greatest path acceleration that keeps the state inside
//! those sets, and [`sim`] closes the loop against a plant.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod io;
pub mod reachability;
pub mod scenario;
pub mod sim;

pub use control::{ControlOutput, ControllerState, Mode, TrackingGains, TtReference};
pub use dynamics::{CoefficientTriple, DynamicsModel, Link, RobotConfig};
pub use error::{Error, Result};
pub use geometry::{Derivative, PathConfig, PathSpline, Waypoint};
pub use reachability::{
    compute_controllable_sets, greedy_forward_pass, robust_one_step_set, ControllableSets, DiscretizationGrid,
    Interval, ReachOptions, StageConstraints, VelocityProfile,
};
pub use scenario::{Scenario, ScenarioConfig};
pub use sim::{simulate, CoupledState, DecayFit, SimOptions, SimResult, TerminalStatus};
