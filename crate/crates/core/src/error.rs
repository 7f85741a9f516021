use std::fmt;

/// Failure classes shared by every stage of the pipeline.
///
/// The class decides the process exit code at the command-line boundary:
/// usage errors are caller mistakes, data errors come from inputs that are
/// malformed or inconsistent, numeric errors from non-finite training values.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Error::Usage(msg.to_string())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Error::Data(msg.to_string())
    }

    pub fn numeric(msg: impl fmt::Display) -> Self {
        Error::Numeric(msg.to_string())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Prefixes the message with a record id, keeping the error class.
    pub fn with_record(self, id: &str) -> Self {
        match self {
            Error::Usage(m) => Error::Usage(format!("record {id}: {m}")),
            Error::Data(m) => Error::Data(format!("record {id}: {m}")),
            Error::Numeric(m) => Error::Numeric(format!("record {id}: {m}")),
            io @ Error::Io { .. } => io,
        }
    }
}
