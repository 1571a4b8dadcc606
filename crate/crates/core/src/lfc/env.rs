use std::path::Path;

use serde::Serialize;

use super::agc::{dispatch_command, pi_agc_command, AceIntegrator};
use super::dynamics::{step, StepOutcome};
use super::{GridParams, GridState, LfcError, Result, Scenario};

const TIME_EPS: f64 = 1e-9;

/// Maps frequencies (Hz) to `clamp((f − f_nom)/scale, −1, 1)`.
pub fn normalize_frequencies(freqs: &[f64], nominal: f64, scale_hz: f64) -> Vec<f64> {
    freqs.iter().map(|f| ((f - nominal) / scale_hz).clamp(-1.0, 1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub time_s: f64,
    pub freqs_hz: Vec<f64>,
    pub ace_pu: f64,
    pub u_pu: f64,
    pub actions_pu: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Number of control intervals in which an action was saturated.
    pub clamp_events: usize,
    /// Lowest single-generator frequency seen at any integration step, Hz.
    pub nadir_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySummary {
    /// Mean generator frequency at the end of the episode, Hz.
    pub final_freq_hz: f64,
    pub nadir_hz: f64,
    /// Sum of per-interval rewards.
    pub total_return: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn summary(&self) -> TrajectorySummary {
        let last = self.rows.last();
        let final_freq_hz = last
            .map(|r| r.freqs_hz.iter().sum::<f64>() / r.freqs_hz.len() as f64)
            .unwrap_or(f64::NAN);
        TrajectorySummary {
            final_freq_hz,
            nadir_hz: self.nadir_hz,
            total_return: self.rows.iter().skip(1).map(|r| r.reward).sum(),
            steps: self.rows.len().saturating_sub(1),
        }
    }
}

/// Writes `time_s, f1_hz..fN_hz, ace_pu, u_pu, a1_pu..aN_pu, reward`.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let io = |e: csv::Error| LfcError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let n = traj.rows.first().map_or(0, |r| r.freqs_hz.len());
    let mut header = vec!["time_s".to_string()];
    header.extend((1..=n).map(|j| format!("f{j}_hz")));
    header.push("ace_pu".into());
    header.push("u_pu".into());
    header.extend((1..=n).map(|j| format!("a{j}_pu")));
    header.push("reward".into());
    w.write_record(&header).map_err(io)?;
    for r in &traj.rows {
        let mut rec = vec![r.time_s.to_string()];
        rec.extend(r.freqs_hz.iter().map(f64::to_string));
        rec.push(r.ace_pu.to_string());
        rec.push(r.u_pu.to_string());
        rec.extend(r.actions_pu.iter().map(f64::to_string));
        rec.push(r.reward.to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| LfcError::Io(format!("{}: {e}", path.display())))
}

/// Outcome of one control interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    /// Per-generator frequencies at the end of the interval, Hz.
    pub observation: Vec<f64>,
    /// Mean of the per-integration-step rewards over the interval.
    pub reward: f64,
    pub done: bool,
    pub clamped: bool,
}

/// Episode driver: integrates the plant at `dt` and holds each action for
/// one control interval.
#[derive(Debug, Clone)]
pub struct LfcEnv {
    params: GridParams,
    scenario: Scenario,
    state: GridState,
    substeps: u64,
    trajectory: Trajectory,
}

impl LfcEnv {
    pub fn new(params: GridParams, scenario: Scenario) -> Result<Self> {
        params.validate()?;
        scenario.validate(params.n_gen)?;
        let state = GridState::zero(&params, scenario.episode_length);
        let mut env = Self { params, scenario, state, substeps: 0, trajectory: Trajectory::default() };
        env.reset();
        Ok(env)
    }

    pub fn params(&self) -> &GridParams {
        &self.params
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    /// Restores the zero state and returns the initial frequencies.
    pub fn reset(&mut self) -> Vec<f64> {
        let mut state = GridState::zero(&self.params, self.scenario.episode_length);
        state.injection = self.scenario.injection.clone();
        self.state = state;
        self.substeps = 0;
        let freqs = self.state.frequencies(self.params.nominal_freq);
        self.trajectory = Trajectory {
            rows: vec![TrajectoryRow {
                time_s: 0.0,
                freqs_hz: freqs.clone(),
                ace_pu: self.total_ace(),
                u_pu: 0.0,
                actions_pu: vec![0.0; self.params.n_gen],
                reward: 0.0,
            }],
            clamp_events: 0,
            nadir_hz: freqs.iter().copied().fold(f64::INFINITY, f64::min),
        };
        freqs
    }

    pub fn is_done(&self) -> bool {
        self.state.sim_time >= self.scenario.episode_length - TIME_EPS
    }

    /// Sum of the per-area ACE values at the current state.
    pub fn total_ace(&self) -> f64 {
        self.state.ace(&self.params).iter().sum()
    }

    /// Normalised observation of the current state.
    pub fn normalized_observation(&self) -> Vec<f64> {
        normalize_frequencies(
            &self.state.frequencies(self.params.nominal_freq),
            self.params.nominal_freq,
            self.params.obs_scale_hz,
        )
    }

    /// Applies `action` for one control interval (or until the episode ends).
    pub fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        self.step_with_command(action, action.iter().sum())
    }

    /// As [`LfcEnv::step`], recording `u` as the total AGC command.
    pub fn step_with_command(&mut self, action: &[f64], u: f64) -> Result<EnvStep> {
        let per_interval = self.params.substeps_per_interval();
        let dt = self.params.dt;
        let mut reward_sum = 0.0;
        let mut taken = 0usize;
        let mut last: Option<StepOutcome> = None;
        let mut clamped = false;
        while taken < per_interval && !self.is_done() {
            let t0 = self.substeps as f64 * dt;
            self.state.load =
                if t0 >= self.scenario.onset - TIME_EPS { self.scenario.magnitude } else { 0.0 };
            let out = step(&self.state, action, &self.params, dt)?;
            self.substeps += 1;
            self.state = out.state.clone();
            self.state.sim_time = self.substeps as f64 * dt;
            let low = out.observation.iter().copied().fold(f64::INFINITY, f64::min);
            self.trajectory.nadir_hz = self.trajectory.nadir_hz.min(low);
            reward_sum += out.reward;
            clamped |= out.clamped;
            taken += 1;
            last = Some(out);
        }
        let Some(last) = last else {
            return Err(LfcError::Validation("step called on a finished episode".into()));
        };
        if clamped {
            self.trajectory.clamp_events += 1;
        }
        let reward = reward_sum / taken as f64;
        let done = self.is_done();
        self.trajectory.rows.push(TrajectoryRow {
            time_s: self.state.sim_time,
            freqs_hz: last.observation.clone(),
            ace_pu: self.total_ace(),
            u_pu: u,
            actions_pu: last.applied_action,
            reward,
        });
        Ok(EnvStep { observation: last.observation, reward, done, clamped })
    }
}

/// Closed-loop PI AGC run over the scenario. The controller samples ACE at
/// each decision, integrates it with the trapezoidal rule, and dispatches
/// `u` by participation factor (per area in two-area mode).
pub fn run_pi_baseline(
    params: &GridParams,
    scenario: &Scenario,
    k_p: f64,
    k_i: f64,
    control_interval: f64,
) -> Result<Trajectory> {
    if !(k_p >= 0.0 && k_i >= 0.0) {
        return Err(LfcError::Validation(format!("PI gains must be non-negative (K_P={k_p}, K_I={k_i})")));
    }
    let params = GridParams { control_interval, ..params.clone() };
    let mut env = LfcEnv::new(params.clone(), scenario.clone())?;
    let n_areas = params.n_areas();
    let mut integrators = vec![AceIntegrator::new(); n_areas];
    let area_alpha: Vec<Vec<f64>> = (0..n_areas)
        .map(|a| {
            let total: f64 = params.area_members(a).map(|j| params.participation[j]).sum();
            params.area_members(a).map(|j| params.participation[j] / total).collect()
        })
        .collect();
    while !env.is_done() {
        let ace = env.state().ace(&params);
        let mut action = vec![0.0; params.n_gen];
        let mut u_total = 0.0;
        for a in 0..n_areas {
            let integral = integrators[a].push(ace[a], control_interval);
            let u = pi_agc_command(ace[a], integral, k_p, k_i);
            u_total += u;
            let shares = if n_areas == 1 { params.participation.clone() } else { area_alpha[a].clone() };
            for (j, d) in params.area_members(a).zip(dispatch_command(u, &shares)?) {
                action[j] = d;
            }
        }
        env.state.ace_integral = integrators.iter().map(AceIntegrator::value).collect();
        env.step_with_command(&action, u_total)?;
    }
    Ok(env.into_trajectory())
}
