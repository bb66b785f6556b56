use thiserror::Error;

/// Errors raised by the robust local GP library.
#[derive(Debug, Error)]
pub enum RlgpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no rows")]
    NoRows,

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        /// 1-based data row (the header is row 0).
        row: usize,
        /// 1-based column.
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("fit failed at outer iteration {iteration} (nu={nu:e}, theta0={theta0:e}, vartheta={vartheta:e}): {message}")]
    FitFailed {
        iteration: usize,
        nu: f64,
        theta0: f64,
        vartheta: f64,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RlgpError>;
