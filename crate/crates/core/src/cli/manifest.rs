//! Experiment manifests: what a command read, what it wrote, and hashes of
//! both.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::store::{file_sha256, from_json, to_json};
use crate::error::Result;
use crate::model::EpochMetrics;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub reconstruction_mse: f64,
    pub cross_entropy: Option<f64>,
    pub symbol_accuracy: Option<f64>,
}

impl From<&EpochMetrics> for EpochSummary {
    fn from(m: &EpochMetrics) -> Self {
        Self {
            epoch: m.epoch,
            reconstruction_mse: m.reconstruction,
            cross_entropy: m.symbols,
            symbol_accuracy: m.symbol_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Derived from the command, variant and config hash, so reruns share it.
    pub run_id: String,
    pub command: String,
    pub variant: Option<String>,
    pub config_hash: String,
    pub store_hash: Option<String>,
    /// Input name to content hash.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<FileEntry>,
    pub checkpoints: Vec<String>,
    pub epochs: Vec<EpochSummary>,
    /// `"ok"`, or a description of the failure.
    pub status: String,
}

impl Manifest {
    pub fn new(command: &str, variant: Option<&str>, config_hash: &str) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(variant.unwrap_or("").as_bytes());
        h.update([0]);
        h.update(config_hash.as_bytes());
        Self {
            run_id: hex::encode(&h.finalize()[..8]),
            command: command.to_string(),
            variant: variant.map(str::to_string),
            config_hash: config_hash.to_string(),
            store_hash: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            checkpoints: Vec::new(),
            epochs: Vec::new(),
            status: "ok".to_string(),
        }
    }

    /// Records output files, hashing their current contents.
    pub fn add_outputs(&mut self, dir: &Path, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f.strip_prefix(dir).unwrap_or(f);
            self.outputs.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: file_sha256(f)?,
            });
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, to_json(self)?)?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        from_json(&dir.join(MANIFEST_FILE))
    }

    /// Re-hashes every listed output and returns the paths that changed.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut changed = Vec::new();
        for e in &self.outputs {
            if file_sha256(dir.join(&e.path)).ok().as_deref() != Some(e.sha256.as_str()) {
                changed.push(e.path.clone());
            }
        }
        Ok(changed)
    }
}
