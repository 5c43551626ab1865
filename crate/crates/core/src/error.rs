use thiserror::Error;

/// Errors raised by the simulator, optimizer and analysis routines.
#[derive(Debug, Error)]
pub enum SnapError {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical precision failure: {0}")]
    Precision(String),

    #[error("degenerate state: {0}")]
    Degenerate(String),

    #[error("pulse update diverged: {0}")]
    Divergence(String),

    #[error("input contract violated: {0}")]
    InputContract(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("I/O error")]
    Io(#[from] std::io::Error),

    #[error("JSON error")]
    Json(#[from] serde_json::Error),

    #[error("malformed table: {0}")]
    Table(String),
}

impl SnapError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SnapError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = SnapError> = std::result::Result<T, E>;
