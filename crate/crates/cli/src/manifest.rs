use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Files of the dataset layout that determine its content, in hashing order.
const DATASET_FILES: [&str; 5] = ["meta.json", "edges.bin", "features.bin", "labels.bin", "splits.json"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub sha256: String,
}

impl DatasetRef {
    /// SHA-256 over each present layout file's name, length and bytes.
    pub fn of(dir: &Path) -> Result<DatasetRef> {
        let mut h = Sha256::new();
        for name in DATASET_FILES {
            let p = dir.join(name);
            if !p.exists() {
                continue;
            }
            let bytes = fs::read(&p).with_context(|| format!("cannot read {}", p.display()))?;
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(DatasetRef {
            path: dir.to_path_buf(),
            sha256: hex::encode(h.finalize()),
        })
    }
}

/// What a run did and with which inputs, written before any result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetRef>,
    pub seeds: Vec<u64>,
    pub precision: String,
    pub threads: usize,
    pub version: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, precision: &str, threads: usize) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config,
            dataset: None,
            seeds: Vec::new(),
            precision: precision.to_string(),
            threads,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        }
    }

    /// Writes `manifest.json` into `out`, creating the directory.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        let p = out.join("manifest.json");
        fs::write(&p, serde_json::to_vec_pretty(self)?).with_context(|| format!("cannot write {}", p.display()))?;
        Ok(p)
    }
}
