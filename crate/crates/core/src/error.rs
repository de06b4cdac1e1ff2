//! Error type shared across the crate.
//!
//! Variants map onto the failure classes the CLI reports through distinct
//! exit codes: configuration, domain/shape misuse, training divergence, I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (non-positive counts, out-of-area positions,
    /// broken learning-rate ordering, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Mismatched vector/matrix dimensions.
    #[error("shape error: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    /// API misuse (empty batch, incomplete trace, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Training produced non-finite parameters.
    #[error("training diverged at episode {episode}: {detail}")]
    Diverged { episode: usize, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this failure class (0 is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Shape { .. } | Error::Usage(_) => 2,
            Error::Diverged { .. } => 3,
            Error::Io(_) | Error::Json(_) => 4,
        }
    }
}
