use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waypoints: {0}")]
    InvalidWaypoints(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("path parameter {0} outside [0, 1]")]
    OutOfDomain(f64),
    #[error("mass matrix is singular or not positive definite")]
    SingularMassMatrix,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("start state {x} outside the stage-0 controllable set")]
    StartOutsideSet { x: f64 },
    #[error("degenerate profile: stage {stage} has zero velocity at both ends")]
    DegenerateProfile { stage: usize },
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
