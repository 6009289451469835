//! Run manifests: what was run, on which config, producing which files.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunExposure {
    pub n_conditional: u64,
    pub n_heralds: u64,
    pub n_unconditional: u64,
    pub n_unconditional_per_herald: u32,
    pub rep_rate_khz: f64,
    pub experiment_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: Vec<String>,
    pub config_path: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<RunExposure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_s_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_as_deg: Option<f64>,
    /// Tag file written by `simulate`, relative to the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_file: Option<String>,
    /// Input runs and computed statistics written by `analyze`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics: Option<serde_json::Value>,
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn new(config_path: &Path, config_hash: String, seed: u64, started_unix: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect(),
            config_path: config_path.display().to_string(),
            config_hash,
            seed,
            outputs: Vec::new(),
            started_unix,
            finished_unix: started_unix,
            exposure: None,
            phi_s_deg: None,
            phi_as_deg: None,
            tag_file: None,
            statistics: None,
        }
    }

    pub fn write(&mut self, dir: &Path) -> std::io::Result<PathBuf> {
        self.finished_unix = unix_now();
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(FILE_NAME);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("cannot parse {}: {e}", path.display()))
    }
}
