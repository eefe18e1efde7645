use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
///
/// The variants line up with how a caller is expected to react: data errors
/// point at an input file or row, config errors at a bad parameter, numeric
/// errors at a model or stage that could not produce a finite answer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("schema mismatch: missing columns {}", .missing.join(", "))]
    Schema { missing: Vec<String> },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by input data (files, rows, columns).
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::Data(_) | Error::Io { .. } | Error::Csv { .. } | Error::Schema { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
