use crate::error::{CliError, CliResult};
use ltv_core::manifest::RunManifest;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "ltv";

/// Output directory of one subcommand and the manifest that records it.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

fn json_bytes(value: &impl Serialize) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}

impl Run {
    pub fn new(dir: &Path, command: &str, config: &impl Serialize) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Other(e.to_string()))?;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(TOOL, env!("CARGO_PKG_VERSION"), command, config),
        })
    }

    pub fn input(&mut self, name: &str, path: &Path) -> CliResult<()> {
        self.manifest
            .add_input(name, path)
            .map_err(|e| CliError::from(e).context(path.display()))
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.manifest.seeds.insert(name.to_string(), value);
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        Ok(self.manifest.write_artifact(&self.dir, rel, bytes)?)
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> CliResult<()> {
        let bytes = json_bytes(value)?;
        self.write(rel, &bytes)
    }

    /// Writes through `f` into a buffer, then records the buffer.
    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> ltv_core::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    pub fn finish(self) -> CliResult<PathBuf> {
        let dir = self.dir.clone();
        let name = self.manifest.finish(&dir)?;
        Ok(dir.join(name))
    }
}
