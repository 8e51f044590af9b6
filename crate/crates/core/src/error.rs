//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum EchoError {
    /// Hilbert-space or grid dimension is out of range.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Two states or grids that must match do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A phase-space region is empty or outside the fundamental domain.
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    /// A scalar parameter violates its precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A decay fit was requested on non-positive values.
    #[error("fit domain error: {0}")]
    FitDomain(String),

    /// A fit window contains too few points.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An ensemble or sample set is empty.
    #[error("empty ensemble: {0}")]
    EmptyEnsemble(String),

    /// Finite-difference derivatives failed their consistency check.
    #[error("unreliable derivative: {0}")]
    UnreliableDerivative(String),

    /// A truncated sum left more probability in the tail than allowed.
    #[error("truncation error: {0}")]
    Truncation(String),

    /// Iterative weight matching did not converge.
    #[error("matching failed: {0}")]
    MatchingFailed(String),

    /// Malformed tabulated-weight file or similar parse failure.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EchoError>;
