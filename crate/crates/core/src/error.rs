use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid spectral triple: {0}")]
    InvalidTriple(String),

    #[error("operator evaluation produced a non-finite value at t = {t}")]
    OperatorEvaluation { t: f64 },

    #[error("implicit step {step} did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("problem is not reducible to a value grid: {0}")]
    NotReducible(String),

    #[error("ε-approximate construction stuck at t = {stuck_at}")]
    ConstructionFailure {
        stuck_at: f64,
        report: Box<crate::viability::StuckReport>,
    },

    #[error("test function rejected: {0}")]
    TestFunctionRejected(String),
}
