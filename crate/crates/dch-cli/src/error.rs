use std::process::ExitCode;
use thiserror::Error;

/// CLI-level failure, split by exit code: validation problems (bad config,
/// bad arguments, unreadable inputs) exit 1, runtime failures (solver or
/// output errors mid-run) exit 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    /// Aggregated config validation: every problem found, not just the first.
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("snapshot version mismatch: {0}")]
    VersionMismatch(String),

    #[error("snapshot corrupt: {0}")]
    CorruptPayload(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Runtime(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tag a core error as a setup problem (exit 1).
pub fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

/// Tag a core or IO error as a run failure (exit 2).
pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}
