//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input length does not match the model or parameter dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Input contains NaN or infinite values, or violates a type invariant.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// A computation produced a non-finite intermediate value.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Training data cannot support the requested fit (e.g. a single class).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A perturbation modifies a feature declared immutable.
    #[error("infeasible perturbation: feature {index} is immutable but delta = {value}")]
    InfeasiblePerturbation { index: usize, value: f64 },

    /// Integration domain has zero volume or non-finite bounds.
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    /// Covariance is not symmetric positive-definite.
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    /// A density evaluated to zero, a negative value, or NaN at a sample.
    #[error("invalid density at sample {index}: {value}")]
    InvalidDensity { index: usize, value: f64 },

    /// Surrogate density vanishes where the target distribution has mass.
    #[error("support mismatch at sample {index}: q = {value}")]
    SupportMismatch { index: usize, value: f64 },

    /// Power iteration did not reach the tolerance within the iteration cap.
    #[error("spectral iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    SpectralFailure { estimate: f64, iterations: usize },

    /// Linear system is singular (e.g. ridge = 0 on a rank-deficient design).
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Surrogate has no nonzero coefficient to move along.
    #[error("surrogate has all-zero coefficients; no counterfactual direction")]
    NoDirection,

    /// Dataset ingestion failure, with 1-based row and column when known.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what}: entry {i} is not finite ({v})"
        )));
    }
    Ok(())
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
