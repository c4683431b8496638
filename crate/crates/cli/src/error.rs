use std::fmt;
use std::path::Path;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad input values, schema refusals, failed predictions.
    Validation,
    /// Unreadable or unwritable files, malformed configuration.
    Config,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Validation => 1,
            ExitKind::Config => 2,
        }
    }
}

/// A failure tagged with the workflow stage that raised it.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &'static str, kind: ExitKind, message: impl Into<String>) -> Self {
        CliError {
            stage,
            kind,
            message: message.into(),
        }
    }

    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Self::new(stage, ExitKind::Config, message)
    }

    pub fn validation(stage: &'static str, message: impl Into<String>) -> Self {
        Self::new(stage, ExitKind::Validation, message)
    }

    pub fn io(stage: &'static str, path: &Path, err: impl fmt::Display) -> Self {
        Self::config(stage, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Diagnostics stay on one line.
        write!(f, "{} stage: {}", self.stage, self.message.replace('\n', " "))
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps a library error, classifying it by kind.
pub fn at(stage: &'static str) -> impl Fn(heartml::Error) -> CliError {
    move |err| {
        use heartml::Error as E;
        let kind = match err {
            E::Io { .. } | E::Csv(_) | E::HeaderMismatch(_) | E::InvalidParam { .. } | E::InvalidArgument(_) => {
                ExitKind::Config
            }
            E::Parse { .. } | E::OutOfRange { .. } | E::FieldCount { .. } | E::Shape(_) | E::InvalidData(_) => {
                ExitKind::Validation
            }
        };
        CliError::new(stage, kind, err.to_string())
    }
}
