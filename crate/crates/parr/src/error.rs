//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was handed parameters that violate a documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A vector or matrix had the wrong length for the operation.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An operation was called outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Non-finite values showed up where finite arithmetic was required.
    #[error("numerical fault: {0}")]
    Numerical(String),

    /// A serialized file failed magic/version/shape validation.
    #[error("corrupt or incompatible file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
