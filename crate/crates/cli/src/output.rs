//! Artifact envelopes. Every JSON file the CLI writes has the shape
//! `{schema, meta, payload}`; run-specific fields such as the timestamp
//! live in `meta` so payloads compare byte for byte across reruns.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SCHEMA_PREFIX: &str = "viability-kit";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
    pub threads: usize,
    pub generated_unix_s: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub schema: String,
    pub meta: Meta,
    pub payload: Value,
}

pub fn schema_name(kind: &str) -> String {
    format!("{SCHEMA_PREFIX}/{kind}/v1")
}

/// Kind part of a schema string, if it is one of ours.
pub fn schema_kind(schema: &str) -> Option<&str> {
    schema.strip_prefix(SCHEMA_PREFIX)?.strip_prefix('/')?.strip_suffix("/v1")
}

pub struct Writer {
    pub dir: PathBuf,
    pub command: String,
    pub scenario: String,
    pub seed: u64,
}

impl Writer {
    fn meta(&self) -> Meta {
        Meta {
            tool: SCHEMA_PREFIX.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            scenario: self.scenario.clone(),
            seed: self.seed,
            threads: rayon::current_num_threads(),
            generated_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn write<T: Serialize>(&self, file: &str, kind: &str, payload: &T) -> Result<PathBuf, CliError> {
        let payload =
            serde_json::to_value(payload).map_err(|e| CliError::new(1, format!("serializing {kind}: {e}")))?;
        let env = Envelope { schema: schema_name(kind), meta: self.meta(), payload };
        let body = serde_json::to_string_pretty(&env).map_err(|e| CliError::new(1, e.to_string()))?;
        let path = self.dir.join(file);
        write_text(&path, &(body + "\n"))?;
        Ok(path)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::new(1, format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::new(1, format!("{}: {e}", path.display())))
}
