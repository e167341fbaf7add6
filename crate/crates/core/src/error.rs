use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("weight is not admissible: {0}")]
    Admissibility(String),

    /// Gram/Cholesky breakdown at the given polynomial degree.
    #[error(
        "degenerate Gram matrix at degree {degree}: pivot {pivot:e} below threshold {threshold:e}"
    )]
    Degenerate {
        degree: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("determinant is not positive ({0:e}); measure too coarse for this degree")]
    NonPositiveDeterminant(f64),

    #[error("lift undefined: weight vanishes at {0}")]
    Lift(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("weight vanishes on the entire grid")]
    DegenerateWeight,

    #[error("numeric error: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
