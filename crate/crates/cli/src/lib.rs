//! The `helix` experiment harness: command configurations, run manifests and the command
//! implementations shared by the binary and its tests.

pub mod commands;
pub mod config;
pub mod manifest;

use std::fmt;

/// Process exit codes.
pub mod exit {
    /// Every verdict passed.
    pub const PASS: i32 = 0;
    /// A scientific verdict failed or the run terminated abnormally.
    pub const FAIL: i32 = 1;
    /// Usage or configuration error.
    pub const USAGE: i32 = 2;
}

/// Errors surfaced by the harness, split by the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or environment (exit 2).
    Usage(String),
    /// The computation itself failed (exit 1).
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Run(_) => exit::FAIL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<helix_core::HelixError> for CliError {
    fn from(e: helix_core::HelixError) -> Self {
        match e {
            helix_core::HelixError::InvalidArgument(m) => CliError::Usage(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("i/o: {e}"))
    }
}

/// Reads `HELIX_THREADS` (unset → no cap). A value that is not a positive integer is a usage error.
pub fn thread_cap(var: Option<&str>) -> Result<Option<usize>, CliError> {
    match var {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("HELIX_THREADS must be a positive integer, got {s:?}"))),
        },
    }
}
