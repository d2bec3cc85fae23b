use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, indices or sparse structure do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input data could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    /// Invalid configuration value. `line` is 0 when the value did not come from a file.
    #[error("config error at `{key}` (line {line}): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    /// A loss, gradient or parameter became non-finite, or a row had zero norm.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line,
            message: message.into(),
        }
    }
}
