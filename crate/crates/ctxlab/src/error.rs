use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum CtxError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// Numerical degeneracy: zero variance, singular systems without a
    /// fallback, undefined correlations.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, CtxError>;
