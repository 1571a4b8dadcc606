use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::actor::expectations;
use super::{AgentError, Backend, QuantumActor, Result, Transition};
use crate::ansatz::{CircuitLayout, PqcParams};
use crate::gradients::{vjp, AngleSelection};
use crate::qsim::PauliAxis;

/// PQC action-value function `Q(s, a) = w_out·⟨X_0⟩ + b_out` on the
/// concatenated input `[s, a / action_norm]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCritic {
    pub layout: CircuitLayout,
    pub params: PqcParams,
    pub w_out: f64,
    pub b_out: f64,
    /// Actions are divided by this before encoding.
    pub action_norm: f64,
}

impl QuantumCritic {
    pub fn new(layout: CircuitLayout, params: PqcParams, w_out: f64, b_out: f64, action_norm: f64) -> Result<Self> {
        let critic = Self { layout, params, w_out, b_out, action_norm };
        critic.validate()?;
        Ok(critic)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(&self.layout)?;
        match self.layout.observables() {
            [o] if o.axis == PauliAxis::X && o.qubit == 0 => {}
            _ => return Err(AgentError::Config("critic must measure exactly Pauli-X on qubit 0".into())),
        }
        if !(self.action_norm > 0.0 && self.action_norm.is_finite()) {
            return Err(AgentError::Config("critic action_norm must be positive".into()));
        }
        if !self.w_out.is_finite() || !self.b_out.is_finite() {
            return Err(AgentError::Config("critic output weights must be finite".into()));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layout.n_inputs()
    }

    fn input(&self, observation: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        if observation.len() + action.len() != self.n_inputs() {
            return Err(AgentError::Shape(format!(
                "critic expects {} inputs, got {} + {}",
                self.n_inputs(),
                observation.len(),
                action.len()
            )));
        }
        Ok(observation.iter().copied().chain(action.iter().map(|a| a / self.action_norm)).collect())
    }

    /// ⟨X_0⟩ on `[s, a/action_norm]`.
    pub fn readout(&self, observation: &[f64], action: &[f64], backend: &Backend) -> Result<f64> {
        let x = self.input(observation, action)?;
        Ok(expectations(&self.layout, &self.params, &x, backend)?[0])
    }

    pub fn forward(&self, observation: &[f64], action: &[f64], backend: &Backend) -> Result<f64> {
        Ok(self.w_out * self.readout(observation, action, backend)? + self.b_out)
    }

    /// Circuit parameters followed by `w_out`, `b_out`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.params.to_flat();
        v.push(self.w_out);
        v.push(self.b_out);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.params.len();
        assert_eq!(flat.len(), n + 2, "critic flat vector length");
        self.params.set_flat(&flat[..n]);
        self.w_out = flat[n];
        self.b_out = flat[n + 1];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGradient {
    pub params: Vec<f64>,
    pub w_out: f64,
    pub b_out: f64,
}

impl CriticGradient {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.params.clone();
        v.push(self.w_out);
        v.push(self.b_out);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticLoss {
    pub loss: f64,
    pub grad: CriticGradient,
    /// Bootstrapped targets `y`, one per transition.
    pub targets: Vec<f64>,
}

/// Evaluation-site tags for deriving noise streams.
const SITE_TARGET_ACTOR: u64 = 0;
const SITE_TARGET_CRITIC: u64 = 1;
const SITE_CRITIC: u64 = 2;
const SITE_CRITIC_GRAD: u64 = 3;
const SITE_ACTOR: u64 = 4;
const SITE_CRITIC_INPUT_GRAD: u64 = 5;
const SITE_ACTOR_GRAD: u64 = 6;

fn check_batch(batch: &[Transition]) -> Result<()> {
    if batch.is_empty() {
        Err(AgentError::EmptyBatch)
    } else {
        Ok(())
    }
}

/// TD target `y = r + γ·(1 − done)·Q'(s', μ'(s'))`.
pub(crate) fn td_target(
    t: &Transition,
    target_actor: &QuantumActor,
    target_critic: &QuantumCritic,
    gamma: f64,
    backend: &Backend,
    index: u64,
) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let next_action = target_actor.forward(&t.next_state, &backend.at(&[SITE_TARGET_ACTOR, index]))?;
    let q_next = target_critic.forward(&t.next_state, &next_action, &backend.at(&[SITE_TARGET_CRITIC, index]))?;
    Ok(t.reward + gamma * q_next)
}

/// Mean squared TD error over `batch` and its gradient with respect to every
/// critic parameter. Targets are treated as constants.
pub fn critic_loss(
    batch: &[Transition],
    critic: &QuantumCritic,
    target_actor: &QuantumActor,
    target_critic: &QuantumCritic,
    gamma: f64,
    backend: &Backend,
) -> Result<CriticLoss> {
    check_batch(batch)?;
    let per_row: Vec<(f64, f64, Vec<f64>, f64, f64)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let i = i as u64;
            let y = td_target(t, target_actor, target_critic, gamma, backend, i)?;
            let x = critic.input(&t.state, &t.action)?;
            let ex = expectations(&critic.layout, &critic.params, &x, &backend.at(&[SITE_CRITIC, i]))?[0];
            let diff = critic.w_out * ex + critic.b_out - y;
            let g = backend.at(&[SITE_CRITIC_GRAD, i]);
            let d = vjp(&critic.layout, &critic.params, &x, &[1.0], g.method, &AngleSelection::All, g.active_noise())?;
            let scale = 2.0 * diff * critic.w_out;
            let params = d.params.iter().map(|v| scale * v).collect();
            Ok((y, diff * diff, params, 2.0 * diff * ex, 2.0 * diff))
        })
        .collect::<Result<_>>()?;

    let n = batch.len() as f64;
    let mut grad = CriticGradient { params: vec![0.0; critic.params.len()], w_out: 0.0, b_out: 0.0 };
    let mut loss = 0.0;
    let mut targets = Vec::with_capacity(batch.len());
    for (y, sq, params, gw, gb) in per_row {
        targets.push(y);
        loss += sq;
        for (acc, v) in grad.params.iter_mut().zip(params) {
            *acc += v;
        }
        grad.w_out += gw;
        grad.b_out += gb;
    }
    loss /= n;
    grad.params.iter_mut().for_each(|v| *v /= n);
    grad.w_out /= n;
    grad.b_out /= n;
    Ok(CriticLoss { loss, grad, targets })
}

/// Mean squared error of `critic` against fixed `targets`.
pub(crate) fn batch_mse(batch: &[Transition], targets: &[f64], critic: &QuantumCritic, backend: &Backend) -> Result<f64> {
    check_batch(batch)?;
    let mut sum = 0.0;
    for (i, (t, y)) in batch.iter().zip(targets).enumerate() {
        let q = critic.forward(&t.state, &t.action, &backend.at(&[SITE_CRITIC, i as u64]))?;
        sum += (q - y).powi(2);
    }
    Ok(sum / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorGradient {
    /// Ascent direction `∇_θ mean_s Q(s, μ(s))`.
    pub params: Vec<f64>,
    pub norm: f64,
}

/// Deterministic policy gradient over `batch`:
/// `mean_s ∇_a Q(s, a)|_{a=μ(s)} · ∇_θ μ(s)`.
pub fn actor_update_gradient(
    batch: &[Transition],
    actor: &QuantumActor,
    critic: &QuantumCritic,
    backend: &Backend,
) -> Result<ActorGradient> {
    check_batch(batch)?;
    let n_obs = actor.n_inputs();
    let n_act = actor.n_actions();
    if n_obs + n_act != critic.n_inputs() {
        return Err(AgentError::Shape(format!(
            "actor ({n_obs} inputs, {n_act} actions) does not match a {}-input critic",
            critic.n_inputs()
        )));
    }
    let action_wires = AngleSelection::Inputs(n_obs..n_obs + n_act);
    let rows: Vec<Vec<f64>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let i = i as u64;
            let z = actor.readout(&t.state, &backend.at(&[SITE_ACTOR, i]))?;
            let a = actor.post_process(&z);
            let x = critic.input(&t.state, &a)?;
            let cb = backend.at(&[SITE_CRITIC_INPUT_GRAD, i]);
            let dq = vjp(&critic.layout, &critic.params, &x, &[1.0], cb.method, &action_wires, cb.active_noise())?;
            let g_a: Vec<f64> = dq.inputs[n_obs..].iter().map(|d| critic.w_out * d / critic.action_norm).collect();
            let w = actor.pullback(&z, &g_a);
            let ab = backend.at(&[SITE_ACTOR_GRAD, i]);
            Ok(vjp(&actor.layout, &actor.params, &t.state, &w, ab.method, &AngleSelection::All, ab.active_noise())?
                .params)
        })
        .collect::<Result<_>>()?;
    let n = batch.len() as f64;
    let mut params = vec![0.0; actor.params.len()];
    for row in rows {
        for (acc, v) in params.iter_mut().zip(row) {
            *acc += v;
        }
    }
    params.iter_mut().for_each(|v| *v /= n);
    let norm = params.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ActorGradient { params, norm })
}
