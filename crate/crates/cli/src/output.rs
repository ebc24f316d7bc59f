use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";

/// Artifact list with content hashes, keyed by path relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Union of both artifact sets; entries of `other` win on conflict.
    pub fn merge(&mut self, other: &Manifest) {
        self.artifacts.extend(other.artifacts.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
}

/// One subcommand's contribution to `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Section {
    pub command: String,
    pub system: Option<String>,
    /// Named operations with the inputs that produced `results`.
    pub provenance: Vec<Value>,
    pub results: Value,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Report {
    pub sections: BTreeMap<String, Section>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that records every file written through it.
pub struct OutputDir {
    root: PathBuf,
    written: Manifest,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Manifest::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.artifacts.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    pub fn load_report(&self) -> anyhow::Result<Report> {
        let path = self.root.join(REPORT);
        if !path.exists() {
            return Ok(Report::default());
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Adds `section` to `report.json` under `key`, replacing an earlier run.
    pub fn add_section(&mut self, key: &str, section: Section) -> anyhow::Result<()> {
        let mut report = self.load_report()?;
        report.sections.insert(key.to_string(), section);
        self.write_json(REPORT, &report)
    }

    /// Merges this run's artifacts into `manifest.json` and returns its path.
    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let path = self.root.join(MANIFEST);
        let mut manifest = Manifest::load(&path)?;
        manifest.merge(&self.written);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}
