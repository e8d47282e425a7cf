use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {message}", path = .path.display())]
    ConfigRead { path: PathBuf, message: String },
    #[error("config parse error at `{key}`{loc}: {message}", loc = location(*.line, *.column))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        key: String,
        message: String,
    },
    #[error("invalid config value `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error(transparent)]
    Core(#[from] assp_core::Error),
    #[error("cannot write {path}: {message}", path = .path.display())]
    Output { path: PathBuf, message: String },
    #[error("invariant audit failed: {0}")]
    AuditFailed(String),
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        (Some(l), None) => format!(" (line {l})"),
        _ => String::new(),
    }
}

impl CliError {
    /// Process exit code: 2 for config problems, 3 for runtime failures, 4
    /// for a failed audit under `--strict`.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigRead { .. } | CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::Core(_) | CliError::Output { .. } => 3,
            CliError::AuditFailed(_) => 4,
        }
    }
}
