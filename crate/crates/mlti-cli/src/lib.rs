//! Command-line front end for the mlti toolkit: binary tensor persistence,
//! flat key=value run configuration, and the experiment commands that emit
//! CSV data for plots.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod tensorfile;

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Lib(mlti::error::Error),
    Io(std::io::Error),
    /// Corrupt or truncated tensor file; the offset points at the byte
    /// where decoding failed.
    Format { offset: u64, message: String },
    Invalid(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            CliError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mlti::error::Error> for CliError {
    fn from(e: mlti::error::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Process exit code: 0 success, 1 validation or input error, 2 numerical
/// failure (non-convergence, instability).
pub fn exit_code(err: &CliError) -> i32 {
    use mlti::error::Error;
    match err {
        CliError::Lib(e) => match e {
            Error::NotConverged { .. } | Error::Unstable { .. } | Error::Numerical(_) => 2,
            _ => 1,
        },
        _ => 1,
    }
}
