use std::fmt;
use std::io;
use std::path::Path;

use qocnn::Error;

/// Failures mapped onto the documented exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad or missing parameters, unreadable inputs (exit 2).
    Usage(String),
    /// Training produced a non-finite loss (exit 3).
    Diverged(String),
    /// Checkpoint unreadable or incompatible with the request (exit 4).
    Mismatch(String),
    /// Gradient check over tolerance (exit 5).
    Gradcheck(String),
    /// Anything else (exit 1).
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Mismatch(_) => 4,
            CliError::Gradcheck(_) => 5,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn missing(path: &Path, e: io::Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    /// Errors while reading user-supplied inputs count as usage errors.
    pub fn input(path: &Path, e: Error) -> Self {
        CliError::Usage(format!("{}: {e}", path.display()))
    }

    pub fn checkpoint(path: &Path, e: Error) -> Self {
        match e {
            Error::Io(io) => CliError::Usage(format!("{}: {io}", path.display())),
            other => CliError::Mismatch(format!("{}: {other}", path.display())),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence { .. } => CliError::Diverged(e.to_string()),
            Error::InvalidArgument(_) | Error::Value(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Diverged(m) => write!(f, "training diverged: {m}"),
            CliError::Mismatch(m) => write!(f, "checkpoint mismatch: {m}"),
            CliError::Gradcheck(m) => write!(f, "gradient check failed: {m}"),
        }
    }
}
