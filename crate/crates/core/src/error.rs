use thiserror::Error;

/// Errors raised by model construction, enumeration and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("network is unstable (spectral radius {radius:.6} >= 1 - 1e-9)")]
    Unstable { radius: f64 },

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("invalid signal configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("network sampling failed: {0}")]
    Sampling(String),

    #[error("unknown table id {0:?}")]
    UnknownTable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that stem from the model itself (instability,
    /// structural degeneracy) rather than from malformed input.
    pub fn is_model_domain(&self) -> bool {
        matches!(self, Error::Unstable { .. } | Error::Degenerate(_) | Error::Sampling(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {} column {}: {}", e.line(), e.column(), e))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
