use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The request exceeds what an exact method can handle.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The model is structurally unable to produce the requested quantity
    /// (e.g. an absorbing state that is not reached almost surely).
    #[error("structural error: {0}")]
    Structural(String),

    /// A value was inconsistent with the state it was applied to.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
