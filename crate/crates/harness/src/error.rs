use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] adadif::Error),

    /// Declared dataset does not match its reference statistics.
    #[error("dataset {name} does not match reference statistics: {diff}")]
    Stats { name: String, diff: String },

    #[error("label file line {line}: {message}")]
    Labels { line: usize, message: String },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Core(e) if e.is_numerical() => ErrorKind::Numerical,
            Error::Core(adadif::Error::InvalidInput(_)) | Error::Config(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
