use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::file_sha256;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance record written by every stage as `manifest_<command>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the effective configuration, serialized as JSON.
    pub config_hash: Option<String>,
    /// Stage options that are not part of a configuration file.
    pub parameters: BTreeMap<String, String>,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// SHA-256 of a value's JSON serialization.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn begin(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: None,
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            seed: None,
            started: now(),
            finished: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config<T: Serialize>(&mut self, config: &T) -> Result<&mut Self> {
        self.config_hash = Some(config_hash(config)?);
        Ok(self)
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn file_name(command: &str) -> String {
        format!("manifest_{command}.json")
    }

    /// Stamps the finish time and writes the manifest into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished = now();
        let path = dir.join(Self::file_name(&self.command));
        self.outputs.push(path.display().to_string());
        let json = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(&path, json).map_err(Error::io(&path))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Ok(serde_json::from_str(&s)?)
    }
}
