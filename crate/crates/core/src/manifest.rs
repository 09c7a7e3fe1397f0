//! Run manifests: what was run, with which inputs, and the hash of every
//! file it wrote. Manifests carry no timestamps or host details, so an
//! identical rerun produces an identical manifest.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// Hashes of input files, keyed by the name they were given on the
    /// command line.
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

impl RunManifest {
    pub fn new(tool: &str, version: &str, command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            tool: tool.to_string(),
            version: version.to_string(),
            command: command.to_string(),
            config,
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.manifest.json", self.command)
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Writes `bytes` to `dir/rel` and records it.
    pub fn write_artifact(&mut self, dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
        if self.artifacts.iter().any(|a| a.path == rel) {
            return Err(Error::contract(format!("artifact {rel} written twice")));
        }
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes the manifest itself (artifacts sorted by path) and returns its
    /// file name.
    pub fn finish(mut self, dir: &Path) -> Result<String> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let name = self.file_name();
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::create_dir_all(dir)?;
        fs::write(dir.join(&name), text)?;
        Ok(name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Paths of recorded artifacts under `dir` whose content no longer
    /// matches their hash.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for a in &self.artifacts {
            match fs::read(dir.join(&a.path)) {
                Ok(bytes) if sha256_hex(&bytes) == a.sha256 => {}
                Ok(_) => bad.push(a.path.clone()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => bad.push(a.path.clone()),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(bad)
    }
}
