use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outcome {outcome} lies outside the support of the distribution pair")]
    OutsideSupport { outcome: String },

    #[error("quadrature did not converge: relative error {achieved:.3e} exceeds {requested:.3e}")]
    IntegrationFailure { achieved: f64, requested: f64 },

    #[error("distributions are perfectly distinguishable; the Chernoff information is unbounded")]
    Unbounded,

    #[error("distributions are indistinguishable (C = {c:.3e})")]
    Degenerate { c: f64 },

    #[error("likelihood vanished at repetition {step}")]
    ZeroLikelihood { step: usize },

    #[error("formula is singular at {0}")]
    Singular(String),
}

pub type Result<T, E = ReadoutError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> ReadoutError {
    ReadoutError::InvalidParameter(msg.into())
}
