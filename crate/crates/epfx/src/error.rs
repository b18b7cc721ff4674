use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
    ModelMismatch,
    IncompleteRun,
    Io,
    OracleFailure,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Training => 4,
            ErrorKind::ModelMismatch => 5,
            ErrorKind::IncompleteRun => 6,
            ErrorKind::Io | ErrorKind::OracleFailure => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Training => "training",
            ErrorKind::ModelMismatch => "model",
            ErrorKind::IncompleteRun => "run",
            ErrorKind::Io => "io",
            ErrorKind::OracleFailure => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError::new(ErrorKind::Data, message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::new(ErrorKind::Io, format!("{}: {err}", path.display()))
    }

    /// Single machine-parsable line: `error[<tag>]: <message>` with newlines flattened.
    pub fn diagnostic(&self) -> String {
        format!("error[{}]: {}", self.kind.tag(), self.message.replace(['\n', '\r'], " "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.diagnostic())
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
