use thiserror::Error;

use crate::decomposition::ValidationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid decomposition: {0}")]
    Decomposition(#[from] ValidationError),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("black-box error: {message}")]
    BlackBox {
        message: String,
        /// Captured stderr of the child process, if any.
        output: String,
    },

    #[error("black-box timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("unknown optimum for benchmark `{0}`")]
    UnknownOptimum(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
