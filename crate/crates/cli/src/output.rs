//! Emitted files, the run manifest, and plot-data naming.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use stobeam_core::estimates::SweepTable;

use crate::error::CliError;

/// Files produced by a run, held in memory until the run succeeds.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(name.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.files.extend(other.files);
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn inventory(&self) -> Vec<FileEntry> {
        self.files
            .iter()
            .map(|(name, bytes)| FileEntry { name: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) })
            .collect()
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e.to_string()))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Io(path.display().to_string(), e.to_string()))?;
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub pass: bool,
}

/// Everything needed to reproduce and audit a run. Wall-clock timings are
/// kept in a separate file so that the manifest is reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
    pub suites: Vec<SuiteSummary>,
    pub all_pass: bool,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

/// Writes one `(λ, ratio)` series as CSV under a name derived from the
/// configuration hash and the series label.
pub fn emit_plot_data(table: &SweepTable, series: &str, config_hash: &str) -> Result<(String, Vec<u8>), CliError> {
    if table.rows.is_empty() {
        return Err(CliError::EmptyTable(series.to_string()));
    }
    let tag = &sha256_hex(format!("{config_hash}:{series}").as_bytes())[..12];
    let mut bytes = Vec::new();
    table.write_ratio_series(&mut bytes).expect("writing to memory");
    Ok((format!("plot-{series}-{tag}.csv"), bytes))
}
