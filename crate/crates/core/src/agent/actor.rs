use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{AgentError, Backend, Result};
use crate::ansatz::{evaluate, CircuitLayout, PqcParams};
use crate::noise::noisy_evaluate;
use crate::qsim::PauliAxis;

/// Post-processing of the actor's ⟨Z⟩ readout into setpoint deltas.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionMode {
    /// `a_j = A·tanh(⟨Z_j⟩·N_a/K) + bias_j`.
    #[default]
    PerWire,
    /// `a_j = A·tanh(Σ_i ⟨Z_i⟩ / K) + bias_j`: one shared value on every wire.
    Scalar,
}

impl fmt::Display for ActionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionMode::PerWire => "per-wire",
            ActionMode::Scalar => "scalar",
        })
    }
}

impl FromStr for ActionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per-wire" => Ok(ActionMode::PerWire),
            "scalar" => Ok(ActionMode::Scalar),
            other => Err(format!("unknown action mode `{other}` (expected per-wire or scalar)")),
        }
    }
}

pub(crate) fn expectations(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    backend: &Backend,
) -> Result<Vec<f64>> {
    Ok(match backend.active_noise() {
        Some(cfg) => noisy_evaluate(layout, params, input, cfg)?,
        None => evaluate(layout, params, input)?,
    })
}

/// PQC policy μ(s) with Z readout on every action wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumActor {
    pub layout: CircuitLayout,
    pub params: PqcParams,
    #[serde(rename = "A")]
    pub action_scale: f64,
    #[serde(rename = "bias")]
    pub action_bias: Vec<f64>,
    #[serde(rename = "K")]
    pub norm_const: f64,
    #[serde(default)]
    pub mode: ActionMode,
}

impl QuantumActor {
    pub fn new(
        layout: CircuitLayout,
        params: PqcParams,
        action_scale: f64,
        action_bias: Vec<f64>,
        norm_const: f64,
        mode: ActionMode,
    ) -> Result<Self> {
        let actor = Self { layout, params, action_scale, action_bias, norm_const, mode };
        actor.validate()?;
        Ok(actor)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(&self.layout)?;
        if self.layout.observables().iter().any(|o| o.axis != PauliAxis::Z) {
            return Err(AgentError::Config("actor observables must all be Pauli-Z".into()));
        }
        if self.action_bias.len() != self.n_actions() {
            return Err(AgentError::Shape(format!(
                "actor bias has {} entries for {} actions",
                self.action_bias.len(),
                self.n_actions()
            )));
        }
        if !(self.action_scale >= 0.0 && self.action_scale.is_finite()) {
            return Err(AgentError::Config(format!("action scale A = {} must be non-negative", self.action_scale)));
        }
        if !(self.norm_const > 0.0 && self.norm_const.is_finite()) {
            return Err(AgentError::Config(format!("normalisation constant K = {} must be positive", self.norm_const)));
        }
        Ok(())
    }

    pub fn n_actions(&self) -> usize {
        self.layout.observables().len()
    }

    pub fn n_inputs(&self) -> usize {
        self.layout.n_inputs()
    }

    /// Lower and upper limits of each action component.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.action_bias.iter().map(|b| (b - self.action_scale, b + self.action_scale)).collect()
    }

    fn tanh_args(&self, z: &[f64]) -> Vec<f64> {
        let n_a = self.n_actions() as f64;
        match self.mode {
            ActionMode::PerWire => z.iter().map(|zj| zj * n_a / self.norm_const).collect(),
            ActionMode::Scalar => vec![z.iter().sum::<f64>() / self.norm_const; z.len()],
        }
    }

    /// Maps ⟨Z⟩ readouts to actions.
    pub fn post_process(&self, z: &[f64]) -> Vec<f64> {
        self.tanh_args(z)
            .iter()
            .zip(&self.action_bias)
            .map(|(u, b)| self.action_scale * u.tanh() + b)
            .collect()
    }

    /// Pulls an action-space covector `g` back through the post-processing:
    /// returns `w_i = Σ_j g_j ∂a_j/∂⟨Z_i⟩`.
    pub fn pullback(&self, z: &[f64], g: &[f64]) -> Vec<f64> {
        let args = self.tanh_args(z);
        let n_a = self.n_actions() as f64;
        match self.mode {
            ActionMode::PerWire => args
                .iter()
                .zip(g)
                .map(|(u, gj)| gj * self.action_scale * n_a / self.norm_const * (1.0 - u.tanh().powi(2)))
                .collect(),
            ActionMode::Scalar => {
                let slope = self.action_scale / self.norm_const * (1.0 - args[0].tanh().powi(2));
                vec![slope * g.iter().sum::<f64>(); z.len()]
            }
        }
    }

    /// Circuit readout ⟨Z_j⟩ for a normalised observation.
    pub fn readout(&self, observation: &[f64], backend: &Backend) -> Result<Vec<f64>> {
        if observation.len() != self.n_inputs() {
            return Err(AgentError::Shape(format!(
                "actor expects {} inputs, got {}",
                self.n_inputs(),
                observation.len()
            )));
        }
        expectations(&self.layout, &self.params, observation, backend)
    }

    pub fn forward(&self, observation: &[f64], backend: &Backend) -> Result<Vec<f64>> {
        Ok(self.post_process(&self.readout(observation, backend)?))
    }
}
