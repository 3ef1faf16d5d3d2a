//! `summary.json`: config echo, input hashes, result and verdict.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use sha1::{Digest, Sha1};

use crate::config::Config;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Hash of `content` as git stores it as a blob.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub config: BTreeMap<String, String>,
    /// Blob hashes of the canonical config and of every input file.
    pub inputs: BTreeMap<String, String>,
    pub pass: Option<bool>,
    pub result: Value,
    pub artifacts: Vec<String>,
    pub timestamp: Timestamp,
}

#[derive(Debug, Serialize)]
pub struct Timestamp {
    pub finished_unix_s: f64,
}

pub struct Output {
    pub pass: Option<bool>,
    pub result: Value,
    pub artifacts: Vec<String>,
    pub inputs: Vec<(String, Vec<u8>)>,
}

impl Output {
    pub fn new(pass: Option<bool>, result: impl Serialize) -> Result<Self, CliError> {
        Ok(Self {
            pass,
            result: serde_json::to_value(result).map_err(|e| CliError::Run(e.to_string()))?,
            artifacts: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn artifact(mut self, name: impl Into<String>) -> Self {
        self.artifacts.push(name.into());
        self
    }
}

pub fn write(out_dir: &Path, command: &str, config: &Config, output: &Output) -> Result<(), CliError> {
    let mut inputs = BTreeMap::new();
    inputs.insert("config".to_string(), git_blob_hash(config.canonical().as_bytes()));
    for (name, bytes) in &output.inputs {
        inputs.insert(name.clone(), git_blob_hash(bytes));
    }
    let mut artifacts = output.artifacts.clone();
    artifacts.sort();
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        config: config.entries().clone(),
        inputs,
        pass: output.pass,
        result: output.result.clone(),
        artifacts,
        timestamp: Timestamp {
            finished_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        },
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Run(e.to_string()))?;
    std::fs::write(out_dir.join("summary.json"), text + "\n")?;
    Ok(())
}
