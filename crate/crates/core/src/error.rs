use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    NotUnitTrace { trace: f64 },

    #[error("matrix is not positive semi-definite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("zero vector cannot be normalized")]
    ZeroVector,

    #[error("interference pair is not orthogonal: overlap {overlap:e}")]
    NotOrthogonal { overlap: f64 },

    #[error("separability iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("solution set has no retained solutions")]
    EmptySolutionSet,

    #[error("Gram system is inconsistent: residual {residual:e}")]
    InconsistentSystem { residual: f64 },

    #[error("selected solutions {first} and {second} are not orthogonal: overlap {overlap:e}")]
    NotOrthogonalSelection {
        first: usize,
        second: usize,
        overlap: f64,
    },

    #[error("solution index {index} out of range ({len} solutions)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unsupported dimensions ({d_a}, {d_b})")]
    UnsupportedDims { d_a: usize, d_b: usize },

    #[error("eigensolver failed: {0}")]
    EigensolverFailure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
