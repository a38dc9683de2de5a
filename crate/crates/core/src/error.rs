use thiserror::Error;

/// Errors raised by the precoding library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrecodingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("QAM with {levels} levels per dimension has no Gray bit mapping (levels must be a power of two)")]
    UnsupportedBitMapping { levels: usize },

    #[error("channel Gram matrix is not positive definite (rank-deficient channel)")]
    FactorizationFailure,

    #[error("objective became non-finite during line search at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("brute-force search space of {size} points exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: f64, cap: f64 },
}

pub type Result<T, E = PrecodingError> = std::result::Result<T, E>;
