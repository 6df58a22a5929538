use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("waypoint index {index} out of range for path with {len} waypoints")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid index range [{start}, {end}] for path with {len} waypoints")]
    InvalidRange { start: usize, end: usize, len: usize },

    #[error("derivative order {0} not supported (expected 1, 2 or 3)")]
    UnsupportedOrder(usize),

    #[error("path with {len} waypoints is too short for derivative order {order}")]
    PathTooShort { len: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("spline parameter {0} outside [0, 1]")]
    ParameterOutOfRange(f64),

    #[error("could not place a segment of length {distance} inside the bounds after {attempts} attempts")]
    RetryBudgetExceeded { distance: f64, attempts: usize },

    #[error("cannot split {waypoints} waypoints with minimum pod length {ell}")]
    TooFewWaypoints { waypoints: usize, ell: usize },

    #[error("invalid partition parameter: {0}")]
    InvalidPartition(String),

    #[error("cannot absorb {0} remaining waypoints into an empty pod list")]
    AbsorbIntoEmpty(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("algorithm {0} requires a gradient")]
    MissingGradient(&'static str),

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("line search stagnated: step fell below {0:e}")]
    Stagnation(f64),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("stencil reach {reach} exceeds buffer length ell = {ell}")]
    StencilExceedsBuffer { reach: usize, ell: usize },

    #[error("worker failed during epoch {epoch}: {message}")]
    WorkerFailed { epoch: usize, message: String },

    #[error("serialization: {0}")]
    Serialization(String),
}
