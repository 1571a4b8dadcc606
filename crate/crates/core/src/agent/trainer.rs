use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CheckpointTargets, OptimizerState, RngState, CHECKPOINT_VERSION};
use super::critic::{actor_update_gradient, batch_mse, critic_loss};
use super::{
    AgentError, Backend, ExplorationNoise, Optimizer, QuantumActor, QuantumCritic, ReplayBuffer, Result,
    Transition,
};
use crate::ansatz::{init_params, CircuitLayout, Observable};
use crate::config::{streams, ExperimentConfig};
use crate::lfc::{GridParams, LfcEnv, Scenario, Trajectory};
use crate::noise::derive_seed;

/// Which part of the pipeline the warmup thresholds hold back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmupMode {
    /// No gradient updates before the thresholds; exploration from the start.
    #[default]
    Training,
    /// No exploration noise before the thresholds; updates as soon as a batch is available.
    Noise,
}

impl fmt::Display for WarmupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarmupMode::Training => "training",
            WarmupMode::Noise => "noise",
        })
    }
}

impl FromStr for WarmupMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "training" => Ok(WarmupMode::Training),
            "noise" => Ok(WarmupMode::Noise),
            other => Err(format!("unknown warmup mode `{other}` (expected training or noise)")),
        }
    }
}

/// `target ← τ·main + (1 − τ)·target`, componentwise.
pub fn soft_update(target: &mut [f64], main: &[f64], tau: f64) -> Result<()> {
    if target.len() != main.len() {
        return Err(AgentError::Shape(format!("soft update of {} from {} values", target.len(), main.len())));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(AgentError::Config(format!("tau = {tau} outside [0, 1]")));
    }
    for (t, m) in target.iter_mut().zip(main) {
        *t = tau * m + (1.0 - tau) * *t;
    }
    Ok(())
}

pub const LOG_COLUMNS: [&str; 9] = [
    "episode",
    "steps",
    "return",
    "freq_min_hz",
    "freq_final_hz",
    "critic_loss_mean",
    "actor_grad_norm",
    "noise_sigma",
    "wall_ms",
];

/// One training-log line per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub freq_min_hz: f64,
    pub freq_final_hz: f64,
    /// `None` when no update happened during the episode.
    pub critic_loss_mean: Option<f64>,
    pub actor_grad_norm: Option<f64>,
    pub noise_sigma: f64,
    /// Wall-clock time; not persisted in checkpoints so that same-seed runs write identical files.
    #[serde(skip)]
    pub wall_ms: u64,
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

impl LogRow {
    /// CSV fields in [`LOG_COLUMNS`] order.
    pub fn to_record(&self) -> Vec<String> {
        let mut r = self.data_record();
        r.push(self.wall_ms.to_string());
        r
    }

    /// All fields except the wall-clock time.
    pub fn data_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fixed).unwrap_or_default();
        vec![
            self.episode.to_string(),
            self.steps.to_string(),
            fixed(self.episode_return),
            fixed(self.freq_min_hz),
            fixed(self.freq_final_hz),
            opt(self.critic_loss_mean),
            opt(self.actor_grad_norm),
            fixed(self.noise_sigma),
        ]
    }
}

/// Result of a finite-difference spot check of the critic gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub update: u64,
    /// max |analytic − fd| / max(1, max |fd|).
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub log: Vec<LogRow>,
    pub first_trajectory: Option<Trajectory>,
    pub last_trajectory: Option<Trajectory>,
}

const SITE_ROLLOUT: u64 = 0;
const SITE_UPDATE: u64 = 1;

fn actor_layout(config: &ExperimentConfig) -> Result<CircuitLayout> {
    let c = &config.circuit;
    let n = config.grid.n_gen;
    Ok(CircuitLayout::new(c.actor_qubits, n, c.layers, c.actor_entangle, (0..n).map(Observable::z).collect())?)
}

fn critic_layout(config: &ExperimentConfig) -> Result<CircuitLayout> {
    let c = &config.circuit;
    let n = config.grid.n_gen;
    Ok(CircuitLayout::new(c.critic_qubits, 2 * n, c.layers, c.critic_entangle, vec![Observable::x(0)])?)
}

/// Freshly initialised actor and critic for `config`.
pub(crate) fn init_networks(config: &ExperimentConfig) -> Result<(QuantumActor, QuantumCritic)> {
    let c = &config.circuit;
    let spec = c.init_spec();
    let al = actor_layout(config)?;
    let ap = init_params(&al, derive_seed(config.seed, &[streams::ACTOR_INIT]), &spec);
    let actor =
        QuantumActor::new(al, ap, c.action_scale, vec![c.action_bias; config.grid.n_gen], c.norm_const, c.action_mode)?;
    let cl = critic_layout(config)?;
    let cp = init_params(&cl, derive_seed(config.seed, &[streams::CRITIC_INIT]), &spec);
    let critic = QuantumCritic::new(cl, cp, c.critic_w_out, c.critic_b_out, config.grid.action_bound)?;
    Ok((actor, critic))
}

/// Noise-free greedy rollout of `actor` on `scenario`.
pub fn greedy_rollout(actor: &QuantumActor, grid: &GridParams, scenario: &Scenario) -> Result<Trajectory> {
    let mut env = LfcEnv::new(grid.clone(), scenario.clone())?;
    let backend = Backend::exact(crate::gradients::GradMethod::Adjoint);
    if actor.n_inputs() != grid.n_gen || actor.n_actions() != grid.n_gen {
        return Err(AgentError::Shape(format!(
            "actor has {} inputs / {} actions but the grid has {} generators",
            actor.n_inputs(),
            actor.n_actions(),
            grid.n_gen
        )));
    }
    while !env.is_done() {
        let action = actor.forward(&env.normalized_observation(), &backend)?;
        env.step(&action)?;
    }
    Ok(env.into_trajectory())
}

/// DDPG training loop over the LFC environment.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: ExperimentConfig,
    env: LfcEnv,
    actor: QuantumActor,
    critic: QuantumCritic,
    target_actor: QuantumActor,
    target_critic: QuantumCritic,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    replay: ReplayBuffer,
    exploration: ExplorationNoise,
    backend: Backend,
    episode: usize,
    total_steps: u64,
    updates: u64,
    history: Vec<LogRow>,
    fd_checks: Vec<FdCheck>,
    first_trajectory: Option<Trajectory>,
    last_trajectory: Option<Trajectory>,
}

impl Trainer {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate().map_err(|e| AgentError::Config(e.to_string()))?;
        let (actor, critic) = init_networks(&config)?;
        let t = &config.trainer;
        let actor_opt = Optimizer::new(t.optimizer, t.actor_lr, actor.params.len());
        let critic_opt = Optimizer::new(t.optimizer, t.critic_lr, critic.to_flat().len());
        let replay = ReplayBuffer::new(t.buffer_capacity, derive_seed(config.seed, &[streams::REPLAY]))?;
        let env = LfcEnv::new(config.grid.clone(), config.scenario.clone())?;
        let exploration = ExplorationNoise {
            sigma0: t.exploration_sigma * config.circuit.action_scale,
            decay: t.exploration_decay,
            enabled: t.exploration,
            seed: derive_seed(config.seed, &[streams::EXPLORATION]),
        };
        let backend = Backend { method: t.grad_method, noise: config.noise_config() };
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            replay,
            exploration,
            backend,
            env,
            config,
            episode: 0,
            total_steps: 0,
            updates: 0,
            history: Vec::new(),
            fd_checks: Vec::new(),
            first_trajectory: None,
            last_trajectory: None,
        })
    }

    /// Rebuilds a trainer from a checkpoint taken with the same configuration.
    pub fn from_checkpoint(config: ExperimentConfig, ckpt: Checkpoint) -> Result<Self> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(AgentError::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        if ckpt.config_fingerprint != config.fingerprint() {
            return Err(AgentError::Checkpoint("checkpoint was written under a different configuration".into()));
        }
        let mut trainer = Self::new(config)?;
        ckpt.actor.validate()?;
        ckpt.critic.validate()?;
        if ckpt.actor.layout != trainer.actor.layout || ckpt.critic.layout != trainer.critic.layout {
            return Err(AgentError::Checkpoint("circuit layouts do not match the configuration".into()));
        }
        trainer.actor = ckpt.actor;
        trainer.critic = ckpt.critic;
        trainer.target_actor = ckpt.targets.actor;
        trainer.target_critic = ckpt.targets.critic;
        trainer.actor_opt = ckpt.optimizer_state.actor;
        trainer.critic_opt = ckpt.optimizer_state.critic;
        let mut replay = ckpt.replay;
        replay.set_rng(ckpt.rng_state.replay);
        trainer.replay = replay;
        trainer.exploration.seed = ckpt.rng_state.exploration_seed;
        trainer.episode = ckpt.episode;
        trainer.total_steps = ckpt.total_steps;
        trainer.updates = ckpt.updates;
        trainer.history = ckpt.history;
        Ok(trainer)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_fingerprint: self.config.fingerprint(),
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            targets: CheckpointTargets { actor: self.target_actor.clone(), critic: self.target_critic.clone() },
            optimizer_state: OptimizerState { actor: self.actor_opt.clone(), critic: self.critic_opt.clone() },
            episode: self.episode,
            rng_state: RngState { replay: self.replay.rng().clone(), exploration_seed: self.exploration.seed },
            total_steps: self.total_steps,
            updates: self.updates,
            replay: self.replay.clone(),
            history: self.history.iter().map(|r| LogRow { wall_ms: 0, ..r.clone() }).collect(),
            config: self.config.clone(),
        }
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn actor(&self) -> &QuantumActor {
        &self.actor
    }

    pub fn critic(&self) -> &QuantumCritic {
        &self.critic
    }

    pub fn target_actor(&self) -> &QuantumActor {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &QuantumCritic {
        &self.target_critic
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn episodes_completed(&self) -> usize {
        self.episode
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn history(&self) -> &[LogRow] {
        &self.history
    }

    pub fn fd_checks(&self) -> &[FdCheck] {
        &self.fd_checks
    }

    pub fn first_trajectory(&self) -> Option<&Trajectory> {
        self.first_trajectory.as_ref()
    }

    pub fn last_trajectory(&self) -> Option<&Trajectory> {
        self.last_trajectory.as_ref()
    }

    fn warmup_done(&self) -> bool {
        let t = &self.config.trainer;
        self.episode >= t.warmup_episodes && self.total_steps >= t.warmup_steps
    }

    fn explore_now(&self) -> bool {
        match self.config.trainer.warmup_mode {
            WarmupMode::Training => true,
            WarmupMode::Noise => self.warmup_done(),
        }
    }

    fn update_now(&self) -> bool {
        match self.config.trainer.warmup_mode {
            WarmupMode::Training => self.warmup_done(),
            WarmupMode::Noise => true,
        }
    }

    /// Current σ of the behaviour policy.
    pub fn noise_sigma(&self) -> f64 {
        if self.explore_now() {
            self.exploration.sigma(self.episode)
        } else {
            0.0
        }
    }

    /// Behaviour-policy action: μ(s) plus exploration noise, clipped to the
    /// actor range and the plant's setpoint bound.
    fn behaviour_action(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let backend = self.backend.at(&[SITE_ROLLOUT, self.total_steps]);
        let mut action = self.actor.forward(observation, &backend)?;
        if self.explore_now() {
            let noise = self.exploration.sample(self.total_steps, self.episode, action.len());
            for (a, n) in action.iter_mut().zip(noise) {
                *a += n;
            }
        }
        let bound = self.config.grid.action_bound;
        for (a, (lo, hi)) in action.iter_mut().zip(self.actor.bounds()) {
            *a = a.clamp(lo.max(-bound), hi.min(bound));
        }
        Ok(action)
    }

    fn update(&mut self) -> Result<Option<(f64, Option<f64>)>> {
        let t = self.config.trainer.clone();
        let Some(batch) = self.replay.sample(t.batch_size) else {
            return Ok(None);
        };
        let backend = self.backend.at(&[SITE_UPDATE, self.updates]);
        let cl = critic_loss(&batch, &self.critic, &self.target_actor, &self.target_critic, t.gamma, &backend)?;
        if t.fd_check_interval > 0 && self.updates.is_multiple_of(t.fd_check_interval) && !backend.is_noisy() {
            let rel_error = self.fd_check(&batch, &cl.targets, &cl.grad.to_flat())?;
            self.fd_checks.push(FdCheck { update: self.updates, rel_error });
        }
        let mut flat = self.critic.to_flat();
        self.critic_opt.step(&mut flat, &cl.grad.to_flat(), false);
        self.critic.set_flat(&flat);

        let mut grad_norm = None;
        if self.updates.is_multiple_of(t.policy_update_interval) {
            let ag = actor_update_gradient(&batch, &self.actor, &self.critic, &backend)?;
            let mut p = self.actor.params.to_flat();
            self.actor_opt.step(&mut p, &ag.params, true);
            self.actor.params.set_flat(&p);
            grad_norm = Some(ag.norm);
        }

        let mut ta = self.target_actor.params.to_flat();
        soft_update(&mut ta, &self.actor.params.to_flat(), t.tau)?;
        self.target_actor.params.set_flat(&ta);
        let mut tc = self.target_critic.to_flat();
        soft_update(&mut tc, &self.critic.to_flat(), t.tau)?;
        self.target_critic.set_flat(&tc);
        self.updates += 1;
        Ok(Some((cl.loss, grad_norm)))
    }

    fn fd_check(&self, batch: &[Transition], targets: &[f64], analytic: &[f64]) -> Result<f64> {
        let eps = crate::gradients::DEFAULT_FD_EPS;
        let base = self.critic.to_flat();
        let exact = Backend::exact(self.backend.method);
        let mut worst = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..base.len() {
            let mut probe = self.critic.clone();
            let mut v = base.clone();
            v[i] = base[i] + eps;
            probe.set_flat(&v);
            let plus = batch_mse(batch, targets, &probe, &exact)?;
            v[i] = base[i] - eps;
            probe.set_flat(&v);
            let minus = batch_mse(batch, targets, &probe, &exact)?;
            let fd = (plus - minus) / (2.0 * eps);
            worst = worst.max((fd - analytic[i]).abs());
            scale = scale.max(fd.abs());
        }
        Ok(worst / scale)
    }

    /// Runs one episode and appends its log row.
    pub fn run_episode(&mut self) -> Result<LogRow> {
        let start = Instant::now();
        let noise_sigma = self.noise_sigma();
        self.env.reset();
        let mut obs = self.env.normalized_observation();
        let mut steps = 0;
        let mut ret = 0.0;
        let mut losses = Vec::new();
        let mut norms = Vec::new();
        loop {
            let action = self.behaviour_action(&obs)?;
            let out = self.env.step(&action)?;
            let next = self.env.normalized_observation();
            self.replay.push(Transition {
                state: obs,
                action,
                reward: out.reward,
                next_state: next.clone(),
                done: out.done,
            });
            self.total_steps += 1;
            steps += 1;
            ret += out.reward;
            if self.update_now() {
                if let Some((loss, norm)) = self.update()? {
                    losses.push(loss);
                    norms.extend(norm);
                }
            }
            obs = next;
            if out.done {
                break;
            }
        }
        let traj = self.env.trajectory().clone();
        let summary = traj.summary();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let row = LogRow {
            episode: self.episode,
            steps,
            episode_return: ret,
            freq_min_hz: summary.nadir_hz,
            freq_final_hz: summary.final_freq_hz,
            critic_loss_mean: mean(&losses),
            actor_grad_norm: mean(&norms),
            noise_sigma,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        if self.first_trajectory.is_none() {
            self.first_trajectory = Some(traj.clone());
        }
        self.last_trajectory = Some(traj);
        self.history.push(row.clone());
        self.episode += 1;
        Ok(row)
    }

    /// Trains until `config.trainer.episodes` episodes have completed, calling
    /// `on_episode` after each one.
    pub fn train_with(&mut self, mut on_episode: impl FnMut(&LogRow)) -> Result<TrainingOutcome> {
        while self.episode < self.config.trainer.episodes {
            let row = self.run_episode()?;
            on_episode(&row);
        }
        Ok(TrainingOutcome {
            log: self.history.clone(),
            first_trajectory: self.first_trajectory.clone(),
            last_trajectory: self.last_trajectory.clone(),
        })
    }

    pub fn train(&mut self) -> Result<TrainingOutcome> {
        self.train_with(|_| {})
    }

    /// Limits the run to `episodes` in total (used to stop early and resume later).
    pub fn set_episode_budget(&mut self, episodes: usize) {
        self.config.trainer.episodes = episodes;
    }
}
