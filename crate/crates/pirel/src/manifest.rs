//! Run manifests: what ran, with which seeds, how long each phase took, and what it wrote.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub name: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub name: String,
    pub duration_s: f64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// `example` or `run`.
    pub command: String,
    /// Options for `example`, the resolved config document for `run`.
    pub config: serde_json::Value,
    pub seeds: Vec<SeedRecord>,
    pub phases: Vec<PhaseRecord>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            config,
            seeds: Vec::new(),
            phases: Vec::new(),
            outputs: Vec::new(),
            ok: false,
            error: None,
        }
    }

    /// Writes `manifest.json` into `dir` via a temporary file and rename, so a
    /// reader never sees a partial manifest.
    pub fn write_atomic(&self, dir: &Path) -> Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
        serde_json::to_writer_pretty(&mut tmp, self)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(MANIFEST_FILE)).context("installing manifest")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("run", serde_json::json!({"seed": 1}));
        m.seeds.push(SeedRecord { name: "pinn".into(), seed: 99 });
        m.phases.push(PhaseRecord { name: "pinn".into(), duration_s: 1.5, ok: true, error: None });
        m.ok = true;
        m.write_atomic(dir.path()).unwrap();
        assert_eq!(RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
        let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
