use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] exactcomp_core::Error),
}

impl Error {
    pub fn config(field: &str, reason: impl Into<String>) -> Error {
        Error::Config { field: field.to_string(), reason: reason.into() }
    }

    /// 1 for bad input (config, arguments, shapes), 2 for everything that
    /// went wrong while running.
    pub fn exit_code(&self) -> u8 {
        use exactcomp_core::Error as C;
        match self {
            Error::Config { .. } | Error::Parse { .. } => 1,
            Error::Core(C::Argument(_) | C::Shape { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}
