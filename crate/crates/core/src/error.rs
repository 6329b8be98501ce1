use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate error: {0}")]
    Coordinate(String),

    #[error("undefined statistic: {0}")]
    UndefinedStatistic(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    Convergence { what: String, iterations: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Unsupported(_))
    }
}
