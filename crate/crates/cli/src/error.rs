//! Process-level errors: one line on stderr and a class-specific exit code.

use std::path::Path;

use adadif_harness::ErrorKind;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// `code` is a stable, machine-readable prefix such as `unknown-flag`.
#[derive(Debug)]
pub struct CliError {
    pub exit: i32,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(code: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            exit: EXIT_USAGE,
            code,
            message: message.into(),
        }
    }

    pub fn conflict(message: impl Into<String>) -> CliError {
        CliError::usage("conflicting-flags", message)
    }

    pub fn data(code: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            exit: EXIT_DATA,
            code,
            message: message.into(),
        }
    }

    pub fn missing_file(path: &Path) -> CliError {
        CliError::data("missing-file", format!("{} does not exist or is not a file", path.display()))
    }

    pub fn from_clap(err: &clap::Error) -> CliError {
        use clap::error::ErrorKind as K;
        let code = match err.kind() {
            K::UnknownArgument | K::InvalidSubcommand => "unknown-flag",
            K::ArgumentConflict => "conflicting-flags",
            K::MissingRequiredArgument | K::MissingSubcommand => "missing-argument",
            K::InvalidValue | K::ValueValidation | K::NoEquals | K::WrongNumberOfValues => "invalid-value",
            _ => "usage",
        };
        let text = err.to_string();
        let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
        CliError::usage(code, first)
    }

    /// `adadif: <code>: <message>` with newlines folded.
    pub fn line(&self) -> String {
        format!("adadif: {}: {}", self.code, self.message.replace('\n', "; "))
    }
}

impl From<adadif_harness::Error> for CliError {
    fn from(e: adadif_harness::Error) -> CliError {
        let (exit, code) = match e.kind() {
            ErrorKind::Usage => (EXIT_USAGE, "invalid-value"),
            ErrorKind::Data => (EXIT_DATA, "data"),
            ErrorKind::Numerical => (EXIT_NUMERICAL, "numerical"),
        };
        CliError {
            exit,
            code,
            message: e.to_string(),
        }
    }
}
