//! Versioned JSON result files.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub generator: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, body: T) -> Report<T> {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            generator: format!("adadif {}", env!("CARGO_PKG_VERSION")),
            body,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}
