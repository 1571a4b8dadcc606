//! Experiment configuration: one TOML tree with `[grid]`, `[scenario]`,
//! `[circuit]`, `[trainer]`, `[noise]` and `[baseline]` blocks. Every key is
//! optional and falls back to the default five-generator case.

use std::f64::consts::FRAC_PI_8;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{ActionMode, OptimizerKind, WarmupMode};
use crate::ansatz::{EntanglePattern, InitSpec};
use crate::gradients::GradMethod;
use crate::lfc::{GridParams, Scenario};
use crate::noise::{derive_seed, NoiseConfig, Shots};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid override `{0}` (expected path=value)")]
    Override(String),
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.to_string(), message: message.into() }
    }
}

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    /// Repetitions L of the encoding + trainable + entangling layer (actor and critic).
    pub layers: usize,
    pub actor_qubits: usize,
    pub critic_qubits: usize,
    pub actor_entangle: EntanglePattern,
    pub critic_entangle: EntanglePattern,
    /// Half-width of the uniform initial distribution of rotation angles.
    pub init_angle_range: f64,
    pub init_enc_scale: f64,
    /// A: actor output scale, pu.
    pub action_scale: f64,
    /// Actor output offset, pu (applied to every generator).
    pub action_bias: f64,
    /// K: tanh normalisation constant.
    pub norm_const: f64,
    pub action_mode: ActionMode,
    pub critic_w_out: f64,
    pub critic_b_out: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            actor_qubits: 5,
            critic_qubits: 10,
            actor_entangle: EntanglePattern::Chain,
            critic_entangle: EntanglePattern::Ring,
            init_angle_range: FRAC_PI_8,
            init_enc_scale: 1.0,
            action_scale: 0.5,
            action_bias: 0.0,
            norm_const: 5.0,
            action_mode: ActionMode::PerWire,
            critic_w_out: 1.0,
            critic_b_out: 0.0,
        }
    }
}

impl CircuitConfig {
    pub fn init_spec(&self) -> InitSpec {
        InitSpec { angle_range: self.init_angle_range, enc_scale: self.init_enc_scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_episodes: usize,
    pub warmup_steps: u64,
    pub warmup_mode: WarmupMode,
    /// Exploration σ at episode 0 as a fraction of the action scale A.
    pub exploration_sigma: f64,
    pub exploration_decay: f64,
    /// Disables exploration noise entirely when false.
    pub exploration: bool,
    /// Environment steps between actor updates.
    pub policy_update_interval: u64,
    pub grad_method: GradMethod,
    pub optimizer: OptimizerKind,
    /// Compare the critic gradient with finite differences every N updates (0 = never).
    pub fd_check_interval: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 0.01,
            critic_lr: 0.01,
            batch_size: 32,
            buffer_capacity: 10_000,
            warmup_episodes: 20,
            warmup_steps: 400,
            warmup_mode: WarmupMode::Training,
            exploration_sigma: 0.1,
            exploration_decay: 0.995,
            exploration: true,
            policy_update_interval: 1,
            grad_method: GradMethod::Adjoint,
            optimizer: OptimizerKind::Adam,
            fd_check_interval: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    #[default]
    None,
    Nisq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub model: NoiseModel,
    pub depolarizing_prob: f64,
    pub shots: Shots,
    pub readout_flip_prob: f64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        let nisq = NoiseConfig::nisq(0);
        Self {
            model: NoiseModel::None,
            depolarizing_prob: nisq.depolarizing_prob,
            shots: nisq.shots,
            readout_flip_prob: nisq.readout_flip_prob,
        }
    }
}

impl NoiseBlock {
    /// The backend noise model, or `None` when disabled.
    pub fn resolve(&self, seed: u64) -> Option<NoiseConfig> {
        match self.model {
            NoiseModel::None => None,
            NoiseModel::Nisq => Some(NoiseConfig {
                depolarizing_prob: self.depolarizing_prob,
                shots: self.shots,
                readout_flip_prob: self.readout_flip_prob,
                seed,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub k_p: f64,
    pub k_i: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { k_p: 0.5, k_i: 1.0 }
    }
}

/// Seed streams derived from the experiment seed.
pub mod streams {
    pub const ACTOR_INIT: u64 = 1;
    pub const CRITIC_INIT: u64 = 2;
    pub const REPLAY: u64 = 3;
    pub const EXPLORATION: u64 = 4;
    pub const BACKEND: u64 = 5;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub grid: GridParams,
    pub scenario: Scenario,
    pub circuit: CircuitConfig,
    pub trainer: TrainerConfig,
    pub noise: NoiseBlock,
    pub baseline: BaselineConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            output_dir: None,
            grid: GridParams::default(),
            scenario: Scenario::default(),
            circuit: CircuitConfig::default(),
            trainer: TrainerConfig::default(),
            noise: NoiseBlock::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `path` (dot-separated) in a TOML tree, creating tables as needed.
fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| ConfigError::Override(path.into()))?;
    let mut table = root;
    for key in keys {
        if key.is_empty() {
            return Err(ConfigError::Override(path.into()));
        }
        let entry = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::invalid(path, format!("`{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text and applies `path=value` overrides on top.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut tree: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (path, raw) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut tree, path.trim(), parse_value(raw.trim()))?;
        }
        let config: Self = tree.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| ConfigError::invalid("grid", e.to_string()))?;
        self.scenario
            .validate(self.grid.n_gen)
            .map_err(|e| ConfigError::invalid("scenario", e.to_string()))?;

        let c = &self.circuit;
        let n = self.grid.n_gen;
        if c.layers == 0 {
            return Err(ConfigError::invalid("circuit.layers", "must be at least 1"));
        }
        if c.actor_qubits != n {
            return Err(ConfigError::invalid(
                "circuit.actor_qubits",
                format!("{} qubits but the observation has {n} components", c.actor_qubits),
            ));
        }
        if c.critic_qubits != 2 * n {
            return Err(ConfigError::invalid(
                "circuit.critic_qubits",
                format!("{} qubits but observation + action has {} components", c.critic_qubits, 2 * n),
            ));
        }
        if c.critic_qubits > crate::qsim::MAX_QUBITS {
            return Err(ConfigError::invalid("circuit.critic_qubits", "exceeds the simulator capacity"));
        }
        if !(c.action_scale > 0.0 && c.action_scale.is_finite()) {
            return Err(ConfigError::invalid("circuit.action_scale", "must be positive"));
        }
        if !(c.norm_const > 0.0 && c.norm_const.is_finite()) {
            return Err(ConfigError::invalid("circuit.norm_const", "must be positive"));
        }
        for (path, v) in [
            ("circuit.action_bias", c.action_bias),
            ("circuit.init_angle_range", c.init_angle_range),
            ("circuit.init_enc_scale", c.init_enc_scale),
            ("circuit.critic_w_out", c.critic_w_out),
            ("circuit.critic_b_out", c.critic_b_out),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::invalid(path, "must be finite"));
            }
        }

        let t = &self.trainer;
        if !(0.0..1.0).contains(&t.gamma) {
            return Err(ConfigError::invalid("trainer.gamma", "must lie in [0, 1)"));
        }
        if !(t.tau > 0.0 && t.tau <= 1.0) {
            return Err(ConfigError::invalid("trainer.tau", "must lie in (0, 1]"));
        }
        // Zero rates are accepted so a run can be frozen on purpose.
        for (path, v) in [("trainer.actor_lr", t.actor_lr), ("trainer.critic_lr", t.critic_lr)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(path, "must be a non-negative number"));
            }
        }
        if t.batch_size == 0 {
            return Err(ConfigError::invalid("trainer.batch_size", "must be positive"));
        }
        if t.buffer_capacity < t.batch_size {
            return Err(ConfigError::invalid("trainer.buffer_capacity", "must be at least batch_size"));
        }
        if t.policy_update_interval == 0 {
            return Err(ConfigError::invalid("trainer.policy_update_interval", "must be positive"));
        }
        if !(t.exploration_sigma >= 0.0) || !(t.exploration_decay > 0.0 && t.exploration_decay <= 1.0) {
            return Err(ConfigError::invalid(
                "trainer.exploration_sigma",
                "σ must be non-negative and the decay in (0, 1]",
            ));
        }
        if let GradMethod::FiniteDifference(eps) = t.grad_method {
            if !(eps > 0.0) {
                return Err(ConfigError::invalid("trainer.grad_method", "finite-difference step must be positive"));
            }
        }

        if let Some(noise) = self.noise.resolve(0) {
            noise.validate().map_err(|e| ConfigError::invalid("noise", e.to_string()))?;
            if t.grad_method == GradMethod::Adjoint && !noise.is_noiseless() {
                return Err(ConfigError::invalid(
                    "trainer.grad_method",
                    "adjoint differentiation needs the exact statevector; use parameter-shift or finite-diff with a noise model",
                ));
            }
        }
        let b = &self.baseline;
        if !(b.k_p >= 0.0 && b.k_i >= 0.0) {
            return Err(ConfigError::invalid("baseline", "PI gains must be non-negative"));
        }
        Ok(())
    }

    /// Backend noise model with its seed derived from the experiment seed.
    pub fn noise_config(&self) -> Option<NoiseConfig> {
        self.noise.resolve(derive_seed(self.seed, &[streams::BACKEND]))
    }

    /// SHA-256 over everything that determines a run's trajectory. The output
    /// directory and the episode budget are excluded so a run can be resumed
    /// elsewhere or extended.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.trainer.episodes = 0;
        let json = serde_json::to_string(&c).expect("configuration serialises to JSON");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
