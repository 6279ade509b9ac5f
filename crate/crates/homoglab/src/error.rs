use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use homoglab_core::Error as CoreError;

/// Everything a command can fail with, sorted by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files (exit code 2).
    Config(String),
    /// A computation or invariant failed (exit code 1).
    Failed(String),
    /// Writing an output file failed (exit code 1).
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Failed(msg) => write!(f, "{msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

fn is_input_error(e: &CoreError) -> bool {
    match e {
        CoreError::ThetaOutOfRange { .. }
        | CoreError::NonElliptic { .. }
        | CoreError::InvalidGrid(_)
        | CoreError::InvalidCoefficient(_)
        | CoreError::InvalidEpsilon(_)
        | CoreError::Aliasing { .. }
        | CoreError::NotBandLimited(_)
        | CoreError::InvalidConfig(_) => true,
        CoreError::Study { source, .. } => is_input_error(source),
        _ => false,
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if is_input_error(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Failed(e.to_string())
        }
    }
}
