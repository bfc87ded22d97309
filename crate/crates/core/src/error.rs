use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: parse error at line {line}: {message}")]
    Parse {
        context: &'static str,
        line: usize,
        message: String,
    },

    #[error("{context}: format error at line {line}: {message}")]
    Format {
        context: &'static str,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A statistic or confidence that has no defined value for the given input.
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(context: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            context,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn format(context: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            context,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 missing input, 3 parse/format/config,
    /// 4 alignment, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingInput(_) => 2,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            Error::Parse { .. } | Error::Format { .. } | Error::Config(_) => 3,
            Error::Alignment(_) => 4,
            _ => 1,
        }
    }
}
