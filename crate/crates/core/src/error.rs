use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller violated a documented precondition (bad dimensions, empty
    /// data where nonempty is required, invalid hyperparameter values, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Linear algebra gave up after all documented fallbacks (e.g. Cholesky
    /// failure after the jitter escalation). The message carries the
    /// diagnostic of the offending system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file is missing, unreadable, or semantically invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// An I/O failure annotated with the path it concerned.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
