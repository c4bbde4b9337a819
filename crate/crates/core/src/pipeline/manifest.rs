use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineConfig, PipelineError};

/// Run manifest: enough to tell whether two runs used the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub train_seed: u64,
    pub validation_seed: u64,
    pub test_seed: u64,
    pub scenario_pcis: Vec<u32>,
    pub artifacts: Vec<String>,
}

impl Manifest {
    pub fn for_config(cfg: &PipelineConfig) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(cfg.canonical_toml().as_bytes());
        Self {
            config_sha256: hex_string(&hasher.finalize()),
            train_seed: cfg.train.seed,
            validation_seed: cfg.validation.seed,
            test_seed: cfg.test.seed,
            scenario_pcis: cfg.scenario_pcis.clone(),
            artifacts: Vec::new(),
        }
    }

    pub fn record(&mut self, relative_path: impl Into<String>) {
        self.artifacts.push(relative_path.into());
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut sorted = self.clone();
        sorted.artifacts.sort();
        let text = toml::to_string_pretty(&sorted)
            .map_err(|e| PipelineError::Numerical(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
