use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("unknown occupation id {0:?}")]
    UnknownOccupation(String),

    #[error("duplicate occupation id {0:?}")]
    DuplicateOccupation(String),

    #[error("duplicate user id {0:?}")]
    DuplicateUser(String),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("unknown family {0:?}")]
    UnknownFamily(String),

    #[error("benchmark degenerate: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("statistic undefined: {0}")]
    Undefined(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible synthetic configuration: {0}")]
    Infeasible(String),

    #[error("package has no split for seed {0}")]
    MissingSeed(u64),

    #[error("digest mismatch: recorded {recorded}, computed {computed}")]
    DigestMismatch { recorded: String, computed: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than an internal fault.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Json(_))
            || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}
