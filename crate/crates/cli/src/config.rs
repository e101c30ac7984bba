//! Optional TOML run configuration. Every key mirrors a command-line flag;
//! flags take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thermosched_core::experiments::NetworkConfig;
use thermosched_core::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub kernel: Option<String>,
    pub data: Option<String>,
    pub score: Option<String>,
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub sigma_min: Option<f64>,
    pub sigma_max: Option<f64>,
    pub length: Option<usize>,
    pub trials: Option<usize>,
    pub p: Option<f64>,
    pub mode: Option<String>,
    pub strategy: Option<String>,
    pub k: Option<usize>,
    pub k_list: Option<Vec<usize>>,
    pub strategies: Option<Vec<String>>,
    pub curves: Option<PathBuf>,
    pub sched: Option<PathBuf>,
    pub count: Option<usize>,
    pub samples: Option<PathBuf>,
    pub target: Option<String>,
    pub model: Option<PathBuf>,
    pub eval_count: Option<usize>,
    pub network: Option<NetworkConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }
}
