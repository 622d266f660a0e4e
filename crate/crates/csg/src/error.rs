//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by constructors, step functions, and the experiment harness.
#[derive(Debug, Error)]
pub enum CsgError {
    /// A vector had a different length than the context requires.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// An argument failed validation (empty data, non-finite value, bad range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation was called on a state that cannot support it
    /// (e.g. weights requested for an empty history).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The requested combination of options is not implemented
    /// (e.g. exact weights for a multi-dimensional parameter space).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// An experiment configuration file or recipe is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite value appeared during iteration, with the iteration index
    /// (1-based) at which it was detected.
    #[error("numeric error at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    /// Deterministic quadrature failed its convergence check.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CsgError>;

impl CsgError {
    /// Shorthand for a numeric error carrying iteration context.
    pub fn numeric(iteration: usize, message: impl Into<String>) -> Self {
        CsgError::Numeric {
            iteration,
            message: message.into(),
        }
    }

    /// Shorthand for an [`CsgError::InvalidState`] message.
    pub fn invalid_state(message: impl Into<String>) -> Self {
        CsgError::InvalidState(message.into())
    }
}
