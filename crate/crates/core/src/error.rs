use thiserror::Error;

/// Errors surfaced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e} exceeds {tolerance:.3e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("noise vector violates its bounding ellipsoid (quadratic form {value:.6e} > {bound:.6e})")]
    NoiseOutOfBound { value: f64, bound: f64 },

    #[error("gain LMI infeasible at step {step}: {detail}")]
    Infeasible { step: usize, detail: String },

    #[error("conic solver failed: {0}")]
    SolverFailure(String),

    #[error("privacy budget undefined: decay rate q = {q} does not exceed gain bound a_hat = {a_hat}")]
    BudgetUndefined { q: f64, a_hat: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
