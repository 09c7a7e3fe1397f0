use ltv_core::Error as CoreError;
use std::fmt;

/// Failure of a subcommand, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Unreadable or malformed files (exit 3).
    Io(String),
    /// Inputs that do not fit together (exit 4).
    Contract(String),
    /// Anything else (exit 1).
    Other(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Contract(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    /// Prefixes the message with `context`.
    pub fn context(self, context: impl fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{context}: {m}")),
            CliError::Contract(m) => CliError::Contract(format!("{context}: {m}")),
            CliError::Other(m) => CliError::Other(format!("{context}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Contract(m) => write!(f, "inputs do not match: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidConfig(_) | CoreError::InvalidInput(_) | CoreError::ModelKind { .. } => {
                CliError::Config(msg)
            }
            CoreError::Io(_) | CoreError::Format(_) | CoreError::Json(_) => CliError::Io(msg),
            CoreError::Contract(_) => CliError::Contract(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
