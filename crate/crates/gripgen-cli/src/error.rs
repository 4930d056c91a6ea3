use std::fmt;

/// CLI failure categories mapped to process exit codes:
/// config error → 2, invariant violation → 3, anything else → 1.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, malformed or missing input files, resume conflicts.
    Config(String),
    /// A stated invariant of the pipeline failed (corrupt run state,
    /// out-of-range scores, local-accuracy violation).
    Invariant(String),
    /// Unexpected internal failure.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
            CliError::Internal(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gripgen::Error> for CliError {
    fn from(e: gripgen::Error) -> Self {
        use gripgen::Error::*;
        match e {
            InvalidSpace(_) | InvalidPoint(_) | BadFingerCode { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Shorthand constructors used at call sites that know the category.
pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

pub fn invariant_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invariant(msg.into()))
}
