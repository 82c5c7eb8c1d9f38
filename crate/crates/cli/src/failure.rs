//! Command failures carrying the process exit code they map to.
//!
//! The code assignment is part of the tool's contract:
//!
//! * 2: unreadable or unparsable input (config, state file, rates file,
//!   measurement CSV)
//! * 3: channel validation failure during `simulate` (suppressed by
//!   `--force`)
//! * 4: degenerate rate configuration rejected by `simulate`
//! * 5: reconstruction refused on numerical grounds (coincident rates,
//!   condition number over the limit, singular system)
//! * 6: record does not match the scheme (wrong scheme tag, missing
//!   entry, wrong grid, wrong static count)
//! * 1: anything else
//!
//! Argument parsing errors follow clap's convention (also exit code 2).

use std::path::Path;

use phasedamp_core::CoreError;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    /// Bad input file or option value: exit code 2.
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    /// Channel failed its validity scan: exit code 3.
    pub fn channel(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }

    /// Rate configuration unusable for reconstruction: exit code 4.
    pub fn degenerate(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }

    /// Anything without a more specific contract: exit code 1.
    pub fn other(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    /// Attach the offending file to an error raised while reading or
    /// parsing it, keeping the input exit code.
    pub fn in_file(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure::input(format!("{}: {err}", path.display()))
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        let code = match &err {
            CoreError::Parse(_) => 2,
            CoreError::ChannelNotPositive { .. } => 3,
            CoreError::CoincidentRates { .. }
            | CoreError::IllConditioned { .. }
            | CoreError::SingularSystem(_) => 5,
            CoreError::SchemeMismatch(_)
            | CoreError::MissingEntry { .. }
            | CoreError::GridMismatch { .. }
            | CoreError::StaticCountMismatch { .. } => 6,
            _ => 1,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: err.to_string(),
        }
    }
}
