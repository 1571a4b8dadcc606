use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AgentError, LogRow, Optimizer, QuantumActor, QuantumCritic, ReplayBuffer, Result};
use crate::config::ExperimentConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTargets {
    pub actor: QuantumActor,
    pub critic: QuantumCritic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub actor: Optimizer,
    pub critic: Optimizer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    /// Replay sampler stream position.
    pub replay: ChaCha8Rng,
    /// Exploration draws are keyed by step index from this seed.
    pub exploration_seed: u64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_fingerprint: String,
    pub actor: QuantumActor,
    pub critic: QuantumCritic,
    pub targets: CheckpointTargets,
    pub optimizer_state: OptimizerState,
    /// Completed episodes.
    pub episode: usize,
    pub rng_state: RngState,
    pub total_steps: u64,
    pub updates: u64,
    pub replay: ReplayBuffer,
    pub history: Vec<LogRow>,
    pub config: ExperimentConfig,
}

impl Checkpoint {
    /// Writes the checkpoint to a sibling temp file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| AgentError::Io { path: path.display().to_string(), source };
        let json = serde_json::to_vec(self).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
        tmp_name.push(".tmp");
        let tmp = path.with_file_name(tmp_name);
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&json).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| AgentError::Io { path: path.display().to_string(), source })?;
        let ckpt: Self = serde_json::from_slice(&bytes)
            .map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!(
                "{}: unsupported version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                ckpt.version
            )));
        }
        ckpt.actor.validate()?;
        ckpt.critic.validate()?;
        Ok(ckpt)
    }
}
