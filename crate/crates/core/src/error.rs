use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid lag cluster counts: {0}")]
    InvalidK(String),

    #[error("invalid observation at index {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("chain is not ergodic: power iteration did not converge after {0} iterations")]
    NonErgodic(usize),

    #[error("state space too large: {0}")]
    TooLarge(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("cost matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
