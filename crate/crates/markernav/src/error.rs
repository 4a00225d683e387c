use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use markernav_core::Error as CoreError;

/// Process exit codes. Frozen: scripts depend on them.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const NO_PATH: i32 = 4;
    pub const COVERAGE: i32 = 5;
    pub const LOCALIZATION_LOST: i32 = 6;
    pub const INVALID_INPUT: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Format { .. } => exit::INVALID_INPUT,
            CliError::Core(e) => match e {
                CoreError::NoPath | CoreError::EmptyGraph => exit::NO_PATH,
                CoreError::Infeasible { .. } | CoreError::CoverageViolation(..) => exit::COVERAGE,
                CoreError::LocalizationLost(_) => exit::LOCALIZATION_LOST,
                CoreError::Timeout(_) | CoreError::Collision { .. } => exit::OTHER,
                _ => exit::INVALID_INPUT,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            exit::USAGE => "usage",
            exit::IO => "io",
            exit::NO_PATH => "no_path",
            exit::COVERAGE => "coverage",
            exit::LOCALIZATION_LOST => "localization_lost",
            exit::INVALID_INPUT => "invalid_input",
            _ => "error",
        }
    }

    /// Single-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            exit_code: i32,
            message: String,
        }
        serde_json::to_string(&Payload {
            error: self.kind(),
            exit_code: self.exit_code(),
            message: self.to_string(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_failure_class() {
        assert_eq!(CliError::Core(CoreError::NoPath).exit_code(), 4);
        assert_eq!(CliError::Core(CoreError::Infeasible { count: 1, first: (0, 0) }).exit_code(), 5);
        assert_eq!(CliError::Core(CoreError::CoverageViolation(1, 2)).exit_code(), 5);
        assert_eq!(CliError::Core(CoreError::LocalizationLost("x".into())).exit_code(), 6);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::format(Path::new("a"), "bad").exit_code(), 7);
    }

    #[test]
    fn json_is_parseable() {
        let e = CliError::Core(CoreError::NoPath);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "no_path");
        assert_eq!(v["exit_code"], 4);
    }
}
