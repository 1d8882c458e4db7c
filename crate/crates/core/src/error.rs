use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in numeric input")]
    NonFinite,

    #[error("shape error: {0}")]
    Shape(String),

    #[error(
        "matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, largest {largest:e})"
    )]
    NotPsd { eigenvalue: f64, largest: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid correlation schedule: {0}")]
    Schedule(String),

    #[error("ill-conditioned equivalent channel (condition number {0:e})")]
    IllConditioned(f64),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical kernels rather than of the inputs
    /// or the environment around them.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite | Error::NotPsd { .. } | Error::IllConditioned(_) | Error::Schedule(_)
        )
    }
}
