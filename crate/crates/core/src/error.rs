use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("damage value {value} outside [0, 1]")]
    DamageDomain { value: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("field `{name}` has length {got}, expected {expected}")]
    FieldLength {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("element {0} is degenerate")]
    SingularElement(usize),

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("damage minimization did not converge: projected gradient {projected_gradient:e} after {iterations} iterations")]
    DamageSolve {
        projected_gradient: f64,
        iterations: usize,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_len(name: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::FieldLength {
            name,
            expected,
            got,
        });
    }
    Ok(())
}
