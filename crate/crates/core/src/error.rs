use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weights increase at slot {slot}: {prev} -> {next}")]
    NonMonotoneWeights { slot: usize, prev: f64, next: f64 },

    #[error("first weight must be 1, got {0}")]
    BadNormalization(f64),

    #[error("weight {value} at slot {slot} is outside [0, 1]")]
    WeightOutOfRange { slot: usize, value: f64 },

    #[error("exponential profile with delta {delta} has weight {value} at slot {slot}")]
    NotExponential { delta: f64, slot: usize, value: f64 },

    #[error("objective weights sum to {0}, expected 1")]
    AlphaSumMismatch(f64),

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid sensor {id}: {reason}")]
    InvalidSensor { id: usize, reason: String },

    #[error("sensor ids must be a permutation of 1..={0}")]
    BadSensorIds(usize),

    #[error("a resource allocation block needs at least one sensor and one slot")]
    EmptyConfig,

    #[error("discount factor {0} outside [0, 1)")]
    DeltaOutOfRange(f64),

    #[error("discount factor of 1 has no infinite-horizon normalization")]
    DeltaOne,

    #[error("deadline histogram carries no bytes")]
    EmptyHistogram,

    #[error("histogram entry {value} at slot {slot} is negative or not finite")]
    BadHistogramEntry { slot: usize, value: f64 },

    #[error("profile has fewer than 2 usable weights for a fit")]
    DegenerateProfile,

    #[error("sensor {0} has a zero utility coefficient")]
    ZeroUtilityCoefficient(usize),

    #[error("budget {0} must be positive and finite")]
    BadBudget(f64),

    #[error("budget {budget} outside achievable range [{min}, {max}]")]
    BudgetOutOfRange { budget: f64, min: f64, max: f64 },

    #[error("target has {actual} entries for {expected} sensors")]
    TargetDimensionMismatch { expected: usize, actual: usize },

    #[error("discount factor {delta} below feasibility threshold {threshold}")]
    InfeasibleDelta { delta: f64, threshold: f64 },

    #[error("target is not achievable: {0}")]
    InfeasibleTarget(String),

    #[error("share {value} for sensor {id} must be positive")]
    NonPositiveShare { id: usize, value: f64 },

    #[error("exhaustive search over {sensors}^{slots} allocations exceeds the guard of {limit}")]
    InstanceTooLarge {
        sensors: usize,
        slots: usize,
        limit: u64,
    },

    #[error("unknown policy `{0}`")]
    UnknownPolicy(String),

    #[error("policy `{0}` needs identical exponential profiles")]
    NeedsIdenticalExponential(&'static str),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleDelta { .. }
            | Error::InfeasibleTarget(_)
            | Error::NeedsIdenticalExponential(_) => 3,
            Error::InstanceTooLarge { .. } => 4,
            _ => 2,
        }
    }
}
