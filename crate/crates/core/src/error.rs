use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear system is numerically singular (dimension {dim})")]
    SingularSystem { dim: usize },

    #[error("all {attempted} subsamples produced singular systems")]
    AllSubsamplesSingular { attempted: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid sampling weights: {0}")]
    InvalidWeights(String),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration of {count} subsets exceeds cap {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("trajectory has {transitions} transitions, need at least {needed}")]
    TrajectoryTooShort { transitions: usize, needed: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("estimate is not finite")]
    NonFinite,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("file contains no data rows")]
    EmptyFile,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
