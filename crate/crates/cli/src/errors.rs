use std::fmt;

use aggloseg::Error;

/// CLI error with its exit code class: 2 usage/shape, 3 I/O, 4 model/data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Model(_) => 4,
        }
    }

    /// I/O error annotated with the path involved.
    pub fn io_at(path: &std::path::Path, e: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Model(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::DimsMismatch(_, _)
            | Error::InvalidDims(_)
            | Error::ZeroLabel
            | Error::InvalidThreshold(_)
            | Error::InvalidQuartile(_)
            | Error::InvalidSynthParams(_) => CliError::Usage(e.to_string()),
            Error::Io(_)
            | Error::BadMagic
            | Error::BadVersion(_)
            | Error::BadDtype(_)
            | Error::PayloadSizeMismatch { .. }
            | Error::WrongVolumeKind { .. }
            | Error::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
