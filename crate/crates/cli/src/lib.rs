//! Library surface of the `spectemp` CLI: error taxonomy and the
//! plain-text I/O formats (signal/matrix/feature CSV, PGM, bench CSV).

pub mod io;

use std::fmt;
use std::path::{Path, PathBuf};

use spectemp::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io { path: PathBuf, source: std::io::Error },
    Format(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(msg: impl Into<String>) -> Self {
        CliError::Format(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::TooFewPeaks { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Format(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

