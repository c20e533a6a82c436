use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("bracketing failed: {msg} (last bracket [{lo}, {hi}])")]
    Bracketing { msg: String, lo: f64, hi: f64 },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("inconsistent discretization: {0}")]
    Inconsistent(String),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("state outside the admissible region: {0}")]
    OutOfRegion(String),
    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config { line: usize, key: String, msg: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
