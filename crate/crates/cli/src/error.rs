use std::path::Path;
use std::process::ExitCode;

use kgwalk_core::Error as CoreError;

/// Failure of one subcommand, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or malformed inputs (exit 1).
    Invalid(String),
    /// Unreadable inputs, missing checkpoints, unwritable outputs (exit 2).
    Io(String),
    /// Vocabulary checksum mismatch between artifacts (exit 3).
    Incompatible(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
            CliError::Incompatible(_) => 3,
        })
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    /// Attaches the file a core error came from.
    pub fn at(path: &Path, err: CoreError) -> Self {
        match CliError::from(err) {
            CliError::Invalid(m) => CliError::Invalid(format!("{}: {m}", path.display())),
            CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
            CliError::Incompatible(m) => CliError::Incompatible(format!("{}: {m}", path.display())),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Incompatible(m) => write!(f, "incompatible inputs: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Io(e) => CliError::Io(e.to_string()),
            CoreError::Incompatible(m) => CliError::Incompatible(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
