use std::f64::consts::PI;

use super::{GridParams, GridState, LfcError, Result};

/// Result of one integration step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: GridState,
    /// Per-generator frequencies, Hz.
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// The action that was applied after saturation.
    pub applied_action: Vec<f64>,
    /// True when at least one action component was clamped.
    pub clamped: bool,
}

const TIME_EPS: f64 = 1e-9;

/// Time derivative of the packed `[δ, Δω, ΔP_m, ΔP_v]` vector.
fn derivative(p: &GridParams, load: f64, injection: &[f64], action: &[f64], x: &[f64], out: &mut [f64]) {
    let n = p.n_gen;
    let (delta, rest) = x.split_at(n);
    let (omega, rest) = rest.split_at(n);
    let (p_mech, p_valve) = rest.split_at(n);
    let w_nom = 2.0 * PI * p.nominal_freq;
    for j in 0..n {
        let p_sync: f64 = (0..n).map(|k| p.sync_matrix[j][k] * (delta[j] - delta[k])).sum();
        let p_elec = p_sync + injection[j] * load;
        out[j] = w_nom * omega[j];
        out[n + j] = (p_mech[j] - p_elec - p.damping[j] * omega[j]) / (2.0 * p.inertia[j]);
        out[2 * n + j] = (p_valve[j] - p_mech[j]) / p.turbine_tc[j];
        out[3 * n + j] = (action[j] - omega[j] / p.droop[j] - p_valve[j]) / p.governor_tc[j];
    }
}

fn pack(s: &GridState) -> Vec<f64> {
    [&s.delta, &s.omega, &s.p_mech, &s.p_valve].into_iter().flatten().copied().collect()
}

fn unpack(x: &[f64], s: &mut GridState) {
    let n = s.delta.len();
    s.delta.copy_from_slice(&x[..n]);
    s.omega.copy_from_slice(&x[n..2 * n]);
    s.p_mech.copy_from_slice(&x[2 * n..3 * n]);
    s.p_valve.copy_from_slice(&x[3 * n..]);
}

fn rk4(p: &GridParams, s: &GridState, action: &[f64], dt: f64) -> Vec<f64> {
    let x = pack(s);
    let m = x.len();
    let f = |x: &[f64], out: &mut [f64]| derivative(p, s.load, &s.injection, action, x, out);
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    f(&x, &mut k1);
    for i in 0..m {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    f(&tmp, &mut k2);
    for i in 0..m {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    f(&tmp, &mut k3);
    for i in 0..m {
        tmp[i] = x[i] + dt * k3[i];
    }
    f(&tmp, &mut k4);
    (0..m).map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// Per-step reward: `−mean_j (f_j − f_nom)² − λ·‖a‖²`.
pub(crate) fn reward(p: &GridParams, freqs: &[f64], action: &[f64]) -> f64 {
    let dev = freqs.iter().map(|f| (f - p.nominal_freq).powi(2)).sum::<f64>() / freqs.len() as f64;
    let effort: f64 = action.iter().map(|a| a * a).sum();
    -dev - p.effort_weight * effort
}

/// Advances the plant by one RK4 step of length `dt` with the setpoint
/// deltas `action` held constant. The disturbance in `state` is held
/// over the step; out-of-bound actions are clamped to `±action_bound`.
pub fn step(state: &GridState, action: &[f64], params: &GridParams, dt: f64) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(LfcError::Validation(format!("dt must be positive, got {dt}")));
    }
    if action.len() != params.n_gen {
        return Err(LfcError::Validation(format!(
            "action has {} components, expected {}",
            action.len(),
            params.n_gen
        )));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(LfcError::Validation("action contains non-finite values".into()));
    }
    let bound = params.action_bound;
    let applied: Vec<f64> = action.iter().map(|a| a.clamp(-bound, bound)).collect();
    let clamped = applied.iter().zip(action).any(|(a, b)| a != b);

    let x = rk4(params, state, &applied, dt);
    let mut next = state.clone();
    unpack(&x, &mut next);
    next.sim_time = state.sim_time + dt;
    if !next.is_finite() {
        return Err(LfcError::Divergence { time: next.sim_time, state: Box::new(next) });
    }
    let observation = next.frequencies(params.nominal_freq);
    let reward = reward(params, &observation, &applied);
    let done = next.sim_time >= next.horizon - TIME_EPS;
    Ok(StepOutcome { state: next, observation, reward, done, applied_action: applied, clamped })
}
