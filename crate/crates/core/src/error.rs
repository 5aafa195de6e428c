use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("dimension mismatch at observation {index}: expected {expected}, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("observations need at least 2 components, found {0}")]
    DimensionTooSmall(usize),

    #[error("non-finite value in observation {0}")]
    NonFinite(usize),

    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("fewer observations than one block (n = {n}, b = {b})")]
    FewerThanOneBlock { n: usize, b: usize },

    #[error("infeasible block scheme (n = {n}, b = {b}, k = {k}): {reason}")]
    InfeasibleScheme {
        n: usize,
        b: usize,
        k: usize,
        reason: &'static str,
    },

    #[error("insufficient exceedance candidates: {nonzero} nonzero radii in window, need {needed}")]
    InsufficientExceedances { nonzero: usize, needed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{replications} replications cannot resolve nominal size {size}: need size * replications >= 10")]
    InsufficientReplications { size: f64, replications: usize },

    #[error(
        "no limiting critical values available in dimension {0}; \
         run a per-sample simulation of the estimated limit process instead"
    )]
    MissingSimulation(usize),

    #[error("the estimated spectral measure has no atoms")]
    NoAtoms,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from parameters that cannot work on the given data
    /// (as opposed to unreadable or malformed input).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::FewerThanOneBlock { .. }
                | Error::InfeasibleScheme { .. }
                | Error::InsufficientExceedances { .. }
                | Error::InsufficientReplications { .. }
                | Error::MissingSimulation(_)
                | Error::NoAtoms
                | Error::InvalidParameter(_)
        )
    }
}
