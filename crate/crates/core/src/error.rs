use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Solver outcomes such as hitting the iteration cap are not errors; they are
/// reported through [`crate::solver::SolveStatus`] so the partial trace stays
/// available.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid regularizer: {0}")]
    InvalidRegularizer(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("subproblem solver did not reach tolerance {target:e} (residual {residual:e})")]
    SubproblemNotConverged { target: f64, residual: f64 },

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
