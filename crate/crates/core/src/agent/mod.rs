//! Quantum DDPG: PQC actor and critic, replay, exploration and training.

mod actor;
mod checkpoint;
mod critic;
mod exploration;
mod optimizer;
mod replay;
mod trainer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::QuantumError;
use crate::gradients::GradMethod;
use crate::lfc::LfcError;
use crate::noise::{derive_seed, NoiseConfig};

pub use actor::{ActionMode, QuantumActor};
pub use checkpoint::{Checkpoint, CheckpointTargets, OptimizerState, RngState, CHECKPOINT_VERSION};
pub use critic::{actor_update_gradient, critic_loss, ActorGradient, CriticGradient, CriticLoss, QuantumCritic};
pub use exploration::ExplorationNoise;
pub use optimizer::{Optimizer, OptimizerKind};
pub use replay::{ReplayBuffer, Transition};
pub use trainer::{greedy_rollout, soft_update, FdCheck, LogRow, Trainer, TrainingOutcome, WarmupMode, LOG_COLUMNS};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Grid(#[from] LfcError),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T, E = AgentError> = std::result::Result<T, E>;

/// How circuit expectations and their derivatives are obtained: the gradient
/// engine plus an optional noisy backend.
///
/// Noisy evaluations take their randomness from `noise.seed`; callers derive a
/// fresh seed per evaluation site with [`Backend::at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backend {
    pub method: GradMethod,
    pub noise: Option<NoiseConfig>,
}

impl Backend {
    pub fn exact(method: GradMethod) -> Self {
        Self { method, noise: None }
    }

    /// The same backend with its noise stream re-derived from `path`.
    pub fn at(&self, path: &[u64]) -> Self {
        Self { method: self.method, noise: self.noise.map(|n| n.reseeded(derive_seed(n.seed, path))) }
    }

    pub fn is_noisy(&self) -> bool {
        self.noise.is_some_and(|n| !n.is_noiseless())
    }

    fn active_noise(&self) -> Option<&NoiseConfig> {
        self.noise.as_ref().filter(|n| !n.is_noiseless())
    }
}
