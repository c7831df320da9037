//! JSON sidecars written next to every output.

use crate::{CliError, CliResult};
use homduet_core::config::ExperimentConfig;
use homduet_core::sequencer::RunLog;
use homduet_core::RunMode;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const INDEX_NAME: &str = "manifest.json";

/// Sidecar of one timestamp file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: RunMode,
    pub duration_s: f64,
    pub timestamp_file: String,
    pub record_count: u64,
    pub wall_time_s: f64,
    pub node1_start_ns: f64,
    pub node2_start_ns: f64,
    pub anchors_ns: Vec<f64>,
    /// Model autocorrelations of the two sources.
    pub configured_g2n1: f64,
    pub configured_g2n2: f64,
    pub config: ExperimentConfig,
    pub run: RunLog,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexEntry {
    pub mode: RunMode,
    pub timestamp_file: String,
    pub manifest_file: String,
}

/// `manifest.json` at the top of an output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_s: f64,
    #[serde(default)]
    pub runs: Vec<IndexEntry>,
    #[serde(default)]
    pub outputs: Vec<String>,
}

impl IndexManifest {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        IndexManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: crate::TOOL_VERSION.to_string(),
            command: command.to_string(),
            config_hash,
            seed,
            wall_time_s: 0.0,
            runs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

/// `dist.homd` → `dist.manifest.json`.
pub fn sidecar_path(timestamp_file: &Path) -> PathBuf {
    timestamp_file.with_extension("manifest.json")
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(crate::io_context(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
