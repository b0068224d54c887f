//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("input matrix is not symmetric (relative violation {max_violation:.3e})")]
    AsymmetricInput { max_violation: f64 },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("McCormick mode requires finite bounds on Y: {context}")]
    UnboundedY { context: String },

    #[error("Lyapunov variable is numerically singular (min eigenvalue {min_eig:.3e})")]
    SingularLyapunov { min_eig: f64 },

    #[error("invalid argument: {context}")]
    InvalidArgument { context: String },

    #[error("the design problem is infeasible: {context}")]
    Infeasible { context: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl CoreError {
    pub fn dim(context: impl Into<String>) -> Self {
        CoreError::DimensionMismatch { context: context.into() }
    }

    pub fn invalid(context: impl Into<String>) -> Self {
        CoreError::InvalidArgument { context: context.into() }
    }
}
