use thiserror::Error;

/// Errors produced by the healing, simulation and phasing routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure at pixel ({row}, {col}): {detail}")]
    NumericFailure {
        row: usize,
        col: usize,
        detail: String,
    },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("degenerate step: iterates coincide")]
    DegenerateStep,

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("grid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
