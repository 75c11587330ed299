use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("real and imaginary parts are not independent (imaginary magnitude {0:.3e})")]
    IndependenceViolated(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("joint bound construction requires Re z >= 0 and Im z >= 0")]
    MissingOrthant,
    #[error("simplex grid is empty for {rows} rows at step {step}")]
    EmptyGrid { rows: usize, step: f64 },
    #[error("joint Monte-Carlo validation requires theta = 1, got {0}")]
    UnsupportedDependence(f64),
    #[error("matrix is singular beyond regularization")]
    SingularMatrix,
    #[error("invalid conic program: {0}")]
    InvalidProgram(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("solver finished with status {0:?}")]
    Solver(crate::socp::Status),
}

pub type Result<T> = std::result::Result<T, Error>;
