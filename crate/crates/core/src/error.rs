use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A source point sits on (or numerically inside) an antenna element.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    /// Configuration problem; `key` names the offending entry.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("run failed: {failed} of {total} cells failed (limit {limit_percent}%)")]
    RunFailure {
        failed: usize,
        total: usize,
        limit_percent: f64,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
