use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Source;
use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Value,
    /// Which layer (default, file or flag) set each config key.
    pub config_sources: BTreeMap<String, Source>,
    /// SHA-256 of every input file, keyed by path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub artifact_version: String,
    pub wall_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: Value::Null,
            config_sources: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            seed: None,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_secs: 0.0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), hash_path(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `<primary>.manifest.json`.
    pub fn write_next_to(&self, primary: &Path) -> Result<PathBuf, CliError> {
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary.with_file_name(name);
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(&path, s)?;
        Ok(path)
    }
}

/// Hashes a file, or every file of a directory in name order.
pub fn hash_path(path: &Path) -> Result<String, CliError> {
    let mut h = Sha256::new();
    if path.is_dir() {
        let mut names: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for p in names.iter().filter(|p| p.is_file()) {
            h.update(p.file_name().unwrap_or_default().as_encoded_bytes());
            h.update([0u8]);
            h.update(fs::read(p)?);
        }
    } else {
        h.update(fs::read(path)?);
    }
    Ok(hex::encode(h.finalize()))
}
