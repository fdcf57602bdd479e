use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: dimension {dimension} exceeds cap {cap}")]
    ResourceLimit { dimension: usize, cap: usize },

    #[error("ingest error at line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("eigensolver failed for dx = {dx} (dimension {dimension})")]
    NumericFailure { dx: f64, dimension: usize },

    #[error("reference index {index} lies in the edge guard band (valid {lo}..{hi})")]
    EdgeEffect { index: usize, lo: usize, hi: usize },

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("wavepacket too narrow: support of {support} levels, need at least {required}")]
    TooNarrow { support: usize, required: usize },

    #[error("oracle scope exceeded: dimension {dimension} > {limit}")]
    OracleScope { dimension: usize, limit: usize },

    #[error("brute-force propagation did not converge at t = {t} (successive scalings differ by {difference:e})")]
    OracleDivergence { t: f64, difference: f64 },

    #[error("insufficient window: {0}")]
    InsufficientWindow(String),

    #[error("insufficient statistics: {have} realizations, need {need}")]
    InsufficientStatistics { have: usize, need: usize },

    #[error("unknown strategy '{name}' (registered: {known})")]
    UnknownStrategy { name: String, known: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn ingest(line: usize, msg: impl Into<String>) -> Self {
        Error::Ingest {
            line,
            message: msg.into(),
        }
    }
}
