use thiserror::Error;

/// Errors produced by the model, simulation and analysis routines.
#[derive(Debug, Error)]
pub enum SpmError {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("output variance is zero; sensitivity indices are undefined")]
    ZeroVariance,

    #[error("expected a vector of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = SpmError> = std::result::Result<T, E>;
