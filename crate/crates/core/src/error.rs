use thiserror::Error;

use crate::majorant::MajorantCertificate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what} = {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("input is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("problem size {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("power iteration did not converge after {iterations} iterations (best {best})")]
    NoConvergence { best: f64, iterations: usize },

    #[error("majorant solver stopped with gap {:e}", .0.gap)]
    SolverStalled(Box<MajorantCertificate>),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn range(what: &'static str, value: impl Into<f64>, range: impl Into<String>) -> Self {
        Error::OutOfRange {
            what,
            value: value.into(),
            range: range.into(),
        }
    }
}
