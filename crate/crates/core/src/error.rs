use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("theta must lie in the interior of the simplex (component {index} is {value})")]
    NonInterior { index: usize, value: f64 },

    #[error("category index {index} out of range for {num_categories} categories")]
    CategoryOutOfRange { index: usize, num_categories: usize },

    #[error("privacy audit failed at step {step}: max log-ratio {max_log_ratio} exceeds epsilon {epsilon}")]
    PrivacyAudit {
        step: usize,
        epsilon: f64,
        max_log_ratio: f64,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
