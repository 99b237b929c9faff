use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum DafError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: record {record}: {message}")]
    Record {
        path: PathBuf,
        /// Line number or record id.
        record: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error("unknown equivalence scorer {0:?}")]
    UnknownEquivalence(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Set(#[from] daf_core::corpus::SetError),
}

impl DafError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DafError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = DafError> = std::result::Result<T, E>;
