use thiserror::Error;

/// Errors shared by every layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for order {order}")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid factorization: {0}")]
    InvalidFactorization(String),

    #[error("singular unfolding (condition estimate {cond:.3e})")]
    SingularUnfolding { cond: f64 },

    #[error("operator unstable (spectral radius estimate {rho:.6})")]
    Unstable { rho: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("capacity exceeded: {needed} entries requested, budget {budget}")]
    CapacityExceeded { needed: usize, budget: usize },

    #[error("weak symmetry violated (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("requested rank {requested} exceeds available rank {available}")]
    InsufficientRank { requested: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Numerical(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
