use std::fmt;

/// Failure of a command, mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config documents, inputs or files.
    Config(String),
    /// A solver stopped without meeting its tolerance.
    Convergence(String),
    /// Computed values disagree with the embedded reference values.
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Mismatch(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence error: {m}"),
            CliError::Mismatch(m) => write!(f, "reference mismatch: {m}"),
        }
    }
}

impl From<mft_core::Error> for CliError {
    fn from(e: mft_core::Error) -> Self {
        match e {
            mft_core::Error::Convergence(_) => CliError::Convergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}
