//! Reduced-order multi-machine load-frequency-control plant.
//!
//! Per generator j (per-unit on system base, Δω in pu of nominal speed):
//!
//! ```text
//! dδ_j/dt        = 2π·f_nom·Δω_j
//! 2H_j·dΔω_j/dt  = ΔP_m,j − ΔP_e,j − D_j·Δω_j
//! T_t,j·dΔP_m,j/dt = ΔP_v,j − ΔP_m,j
//! T_g,j·dΔP_v,j/dt = ΔP_ref,j − Δω_j/R_j − ΔP_v,j
//! ΔP_e,j = Σ_k K_s[j,k]·(δ_j − δ_k) + injection_j·ΔP_L
//! ```

mod agc;
mod dynamics;
mod env;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agc::{compute_ace, dispatch_command, pi_agc_command, AceIntegrator};
pub use dynamics::{step, StepOutcome};
pub use env::{
    normalize_frequencies, run_pi_baseline, write_trajectory_csv, EnvStep, LfcEnv, Trajectory, TrajectoryRow,
    TrajectorySummary,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LfcError {
    #[error("invalid grid configuration: {0}")]
    Validation(String),
    #[error("simulation diverged at t = {time:.3} s (non-finite state)")]
    Divergence { time: f64, state: Box<GridState> },
    #[error("trajectory export failed: {0}")]
    Io(String),
}

pub type Result<T, E = LfcError> = std::result::Result<T, E>;

const SUM_TOL: f64 = 1e-9;

/// Physical and control-loop constants of the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub n_gen: usize,
    /// H_j, seconds.
    pub inertia: Vec<f64>,
    /// D_j, pu.
    pub damping: Vec<f64>,
    /// R_j, pu.
    pub droop: Vec<f64>,
    /// T_g,j, seconds.
    pub governor_tc: Vec<f64>,
    /// T_t,j, seconds.
    pub turbine_tc: Vec<f64>,
    /// K_s, pu/rad; symmetric with zero diagonal.
    pub sync_matrix: Vec<Vec<f64>>,
    /// B in ACE = ΔP_tie − 10·B·Δf, pu per 0.1 Hz with Δf in Hz. Negative by convention.
    pub freq_bias: f64,
    /// α_j; non-negative and summing to 1.
    pub participation: Vec<f64>,
    pub nominal_freq: f64,
    /// Area index (0 or 1) of each generator.
    pub areas: Vec<usize>,
    /// Tie-line measurement coefficient, pu/rad (two-area mode only).
    pub tie_coeff: f64,
    /// Integration step, seconds.
    pub dt: f64,
    /// Interval between control decisions, seconds (zero-order hold in between).
    pub control_interval: f64,
    /// Per-generator setpoint bound a_max, pu.
    pub action_bound: f64,
    /// λ in the effort penalty of the reward.
    pub effort_weight: f64,
    /// Frequency deviation (Hz) mapped to ±1 in normalised observations.
    pub obs_scale_hz: f64,
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_gen;
        let fail = |msg: String| Err(LfcError::Validation(msg));
        if n == 0 {
            return fail("n_gen must be positive".into());
        }
        for (name, v) in [
            ("inertia", &self.inertia),
            ("damping", &self.damping),
            ("droop", &self.droop),
            ("governor_tc", &self.governor_tc),
            ("turbine_tc", &self.turbine_tc),
            ("participation", &self.participation),
        ] {
            if v.len() != n {
                return fail(format!("{name} has {} entries, expected {n}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return fail(format!("{name} contains non-finite values"));
            }
        }
        for (name, v) in [
            ("inertia", &self.inertia),
            ("droop", &self.droop),
            ("governor_tc", &self.governor_tc),
            ("turbine_tc", &self.turbine_tc),
        ] {
            if v.iter().any(|&x| x <= 0.0) {
                return fail(format!("{name} must be strictly positive"));
            }
        }
        if self.damping.iter().any(|&d| d < 0.0) {
            return fail("damping must be non-negative".into());
        }
        validate_participation(&self.participation)?;
        if self.sync_matrix.len() != n || self.sync_matrix.iter().any(|r| r.len() != n) {
            return fail(format!("sync_matrix must be {n}x{n}"));
        }
        for j in 0..n {
            if self.sync_matrix[j][j] != 0.0 {
                return fail(format!("sync_matrix[{j}][{j}] must be zero"));
            }
            for k in 0..n {
                let v = self.sync_matrix[j][k];
                if !v.is_finite() || v < 0.0 {
                    return fail(format!("sync_matrix[{j}][{k}] must be finite and non-negative"));
                }
                if (v - self.sync_matrix[k][j]).abs() > 1e-12 {
                    return fail(format!("sync_matrix is not symmetric at ({j}, {k})"));
                }
            }
        }
        if self.areas.len() != n || self.areas.iter().any(|&a| a > 1) {
            return fail("areas must assign each generator to area 0 or 1".into());
        }
        if self.n_areas() == 2 {
            for a in 0..2 {
                let share: f64 = self.area_members(a).map(|j| self.participation[j]).sum();
                if share <= 0.0 {
                    return fail(format!("area {a} has no participating generator"));
                }
            }
        }
        if !self.freq_bias.is_finite() || !self.tie_coeff.is_finite() {
            return fail("freq_bias and tie_coeff must be finite".into());
        }
        if !(self.nominal_freq > 0.0) {
            return fail("nominal_freq must be positive".into());
        }
        if !(self.dt > 0.0) || !(self.control_interval >= self.dt) {
            return fail("need 0 < dt <= control_interval".into());
        }
        let ratio = self.control_interval / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return fail("control_interval must be an integer multiple of dt".into());
        }
        if !(self.action_bound > 0.0) || !(self.effort_weight >= 0.0) || !(self.obs_scale_hz > 0.0) {
            return fail("action_bound and obs_scale_hz must be positive, effort_weight non-negative".into());
        }
        Ok(())
    }

    pub fn n_areas(&self) -> usize {
        if self.areas.contains(&1) {
            2
        } else {
            1
        }
    }

    pub fn area_members(&self, area: usize) -> impl Iterator<Item = usize> + '_ {
        self.areas.iter().enumerate().filter(move |(_, &a)| a == area).map(|(j, _)| j)
    }

    pub fn substeps_per_interval(&self) -> usize {
        (self.control_interval / self.dt).round() as usize
    }
}

/// Every share in [0, 1] and the shares summing to one.
pub fn validate_participation(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(LfcError::Validation("participation vector is empty".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(LfcError::Validation(format!("participation factor {a} outside [0, 1]")));
    }
    let sum: f64 = alpha.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(LfcError::Validation(format!("participation factors sum to {sum}, expected 1")));
    }
    Ok(())
}

/// A load-step disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// ΔP_L, pu (positive = load increase).
    pub magnitude: f64,
    /// Seconds.
    pub onset: f64,
    /// Share of the load step seen at each generator bus; sums to 1.
    pub injection: Vec<f64>,
    /// Seconds.
    pub episode_length: f64,
}

impl Scenario {
    pub fn validate(&self, n_gen: usize) -> Result<()> {
        let fail = |msg: String| Err(LfcError::Validation(msg));
        if !(self.episode_length > 0.0) {
            return fail("episode_length must be positive".into());
        }
        if !(0.0..=self.episode_length).contains(&self.onset) {
            return fail(format!("onset {} s lies outside the episode", self.onset));
        }
        if !self.magnitude.is_finite() {
            return fail("magnitude must be finite".into());
        }
        if self.injection.len() != n_gen {
            return fail(format!("injection has {} entries, expected {n_gen}", self.injection.len()));
        }
        let sum: f64 = self.injection.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL || self.injection.iter().any(|v| !v.is_finite()) {
            return fail(format!("injection shares sum to {sum}, expected 1"));
        }
        Ok(())
    }

    /// Same scenario with the disturbance removed.
    pub fn without_disturbance(&self) -> Self {
        Self { name: "no-disturbance".into(), magnitude: 0.0, ..self.clone() }
    }
}

/// Dynamic state of the plant plus the active disturbance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    /// Rotor angle deviations δ_j, rad.
    pub delta: Vec<f64>,
    /// Speed deviations Δω_j, pu.
    pub omega: Vec<f64>,
    /// Mechanical power deviations ΔP_m,j, pu.
    pub p_mech: Vec<f64>,
    /// Valve position deviations ΔP_v,j, pu.
    pub p_valve: Vec<f64>,
    /// ∫ACE dτ, pu·s (per area).
    pub ace_integral: Vec<f64>,
    pub sim_time: f64,
    /// Active ΔP_L, pu.
    pub load: f64,
    pub injection: Vec<f64>,
    /// Episode length, seconds.
    pub horizon: f64,
}

impl GridState {
    pub fn zero(params: &GridParams, horizon: f64) -> Self {
        let n = params.n_gen;
        let mut injection = vec![0.0; n];
        injection[0] = 1.0;
        Self {
            delta: vec![0.0; n],
            omega: vec![0.0; n],
            p_mech: vec![0.0; n],
            p_valve: vec![0.0; n],
            ace_integral: vec![0.0; params.n_areas()],
            sim_time: 0.0,
            load: 0.0,
            injection,
            horizon,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.delta
            .iter()
            .chain(&self.omega)
            .chain(&self.p_mech)
            .chain(&self.p_valve)
            .chain(&self.ace_integral)
            .all(|v| v.is_finite())
            && self.sim_time.is_finite()
    }

    /// Per-generator frequencies in Hz: f_j = f_nom·(1 + Δω_j).
    pub fn frequencies(&self, nominal: f64) -> Vec<f64> {
        self.omega.iter().map(|w| nominal * (1.0 + w)).collect()
    }

    /// Frequency deviation of an area (mean over its generators), Hz.
    pub fn area_freq_dev_hz(&self, params: &GridParams, area: usize) -> f64 {
        let members: Vec<usize> = params.area_members(area).collect();
        let mean = members.iter().map(|&j| self.omega[j]).sum::<f64>() / members.len() as f64;
        params.nominal_freq * mean
    }

    /// Tie-line flow out of `area`, pu; zero in single-area mode.
    pub fn tie_flow(&self, params: &GridParams, area: usize) -> f64 {
        if params.n_areas() < 2 {
            return 0.0;
        }
        let mean_delta = |a: usize| {
            let members: Vec<usize> = params.area_members(a).collect();
            members.iter().map(|&j| self.delta[j]).sum::<f64>() / members.len() as f64
        };
        let flow = params.tie_coeff * (mean_delta(0) - mean_delta(1));
        if area == 0 {
            flow
        } else {
            -flow
        }
    }

    /// ACE of each area.
    pub fn ace(&self, params: &GridParams) -> Vec<f64> {
        (0..params.n_areas())
            .map(|a| compute_ace(self.tie_flow(params, a), params.freq_bias, self.area_freq_dev_hz(params, a)))
            .collect()
    }
}

/// Five-generator stand-in for the single-bus 60 % load-step case.
pub fn default_case() -> (GridParams, Scenario) {
    let n = 5;
    let mut sync_matrix = vec![vec![0.0; n]; n];
    for j in 0..n {
        let k = (j + 1) % n;
        sync_matrix[j][k] = 1.5;
        sync_matrix[k][j] = 1.5;
    }
    let params = GridParams {
        n_gen: n,
        inertia: vec![5.0, 4.0, 3.5, 3.0, 2.5],
        damping: vec![3.0; n],
        droop: vec![0.05; n],
        governor_tc: vec![0.2; n],
        turbine_tc: vec![0.5; n],
        sync_matrix,
        freq_bias: -0.05,
        participation: vec![0.2; n],
        nominal_freq: 60.0,
        areas: vec![0; n],
        tie_coeff: 0.5,
        dt: 0.01,
        control_interval: 0.5,
        action_bound: 0.5,
        effort_weight: 0.01,
        obs_scale_hz: 0.3,
    };
    let mut injection = vec![0.0; n];
    injection[1] = 1.0;
    let scenario = Scenario {
        name: "load-step".into(),
        magnitude: 0.10,
        onset: 1.0,
        injection,
        episode_length: 20.0,
    };
    (params, scenario)
}

impl Default for GridParams {
    fn default() -> Self {
        default_case().0
    }
}

impl Default for Scenario {
    fn default() -> Self {
        default_case().1
    }
}
