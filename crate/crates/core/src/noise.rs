//! Fake-backend noise: per-gate depolarizing errors by stochastic Pauli
//! unravelling, readout flips, and finite-shot estimation.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::{CircuitLayout, CompiledCircuit, PqcParams};
use crate::error::{QuantumError, Result};
use crate::qsim::{Mat2, Statevector};

/// Number of measurement repetitions per observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShotsRepr", into = "ShotsRepr")]
pub enum Shots {
    Exact,
    Count(u64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl TryFrom<ShotsRepr> for Shots {
    type Error = String;

    fn try_from(r: ShotsRepr) -> std::result::Result<Self, String> {
        match r {
            ShotsRepr::Count(0) => Err("shots must be >= 1 or \"exact\"".into()),
            ShotsRepr::Count(n) => Ok(Shots::Count(n)),
            ShotsRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Shots> for ShotsRepr {
    fn from(s: Shots) -> Self {
        match s {
            Shots::Exact => ShotsRepr::Word("exact".into()),
            Shots::Count(n) => ShotsRepr::Count(n),
        }
    }
}

impl FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots::Count(n)),
            _ => Err(format!("invalid shot count `{s}` (expected a positive integer or \"exact\")")),
        }
    }
}

impl fmt::Display for Shots {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shots::Exact => f.write_str("exact"),
            Shots::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub depolarizing_prob: f64,
    pub shots: Shots,
    pub readout_flip_prob: f64,
    pub seed: u64,
}

impl NoiseConfig {
    /// Stand-in NISQ profile used when noise is enabled without explicit rates.
    pub fn nisq(seed: u64) -> Self {
        Self { depolarizing_prob: 0.001, shots: Shots::Count(1024), readout_flip_prob: 0.01, seed }
    }

    pub fn noiseless(seed: u64) -> Self {
        Self { depolarizing_prob: 0.0, shots: Shots::Exact, readout_flip_prob: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("depolarizing_prob", self.depolarizing_prob),
            ("readout_flip_prob", self.readout_flip_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(QuantumError::InvalidParameter(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.shots == Shots::Count(0) {
            return Err(QuantumError::InvalidParameter("shots must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.depolarizing_prob == 0.0 && self.readout_flip_prob == 0.0 && self.shots == Shots::Exact
    }

    /// Same profile with a different seed.
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed and a path of counters.
///
/// Used so that per-trajectory and per-evaluation seeds do not depend on the
/// order in which work is scheduled.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Pauli error realised with the native rotations (global phase ignored):
/// X as R_Y(π)·R_Z(π), Y as R_Y(π), Z as R_Z(π).
fn random_pauli(rng: &mut ChaCha8Rng) -> Mat2 {
    match rng.random_range(0..3u8) {
        0 => Mat2::ry(PI).mul(&Mat2::rz(PI)),
        1 => Mat2::ry(PI),
        _ => Mat2::rz(PI),
    }
}

fn draw_error(p: f64, rng: &mut ChaCha8Rng) -> Option<Mat2> {
    (p > 0.0 && rng.random::<f64>() < p).then(|| random_pauli(rng))
}

/// One draw of the gate errors of a trajectory: an optional Pauli after every
/// rotation and after every CNOT, sampled in circuit order.
///
/// Holding a draw fixed turns the trajectory into a unitary circuit, so shifted
/// evaluations can resume from cached prefix states like the noiseless path.
pub(crate) struct GateErrors {
    after_rotation: Vec<Vec<Vec<Option<Mat2>>>>,
    after_cnot: Vec<Vec<Option<Mat2>>>,
    matrices: Vec<Vec<Mat2>>,
}

impl GateErrors {
    pub(crate) fn sample(circuit: &CompiledCircuit, p: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut after_rotation = Vec::with_capacity(circuit.layers.len());
        let mut after_cnot = Vec::with_capacity(circuit.layers.len());
        for blocks in &circuit.layers {
            after_rotation.push(
                blocks
                    .iter()
                    .map(|b| b.rotations.iter().map(|_| draw_error(p, rng)).collect())
                    .collect::<Vec<Vec<_>>>(),
            );
            after_cnot.push(circuit.cnots.iter().map(|_| draw_error(p, rng)).collect());
        }
        let mut errors = Self { after_rotation, after_cnot, matrices: Vec::new() };
        errors.matrices = (0..circuit.layers.len())
            .map(|l| (0..circuit.layers[l].len()).map(|b| errors.block_matrix(circuit, l, b, None)).collect())
            .collect();
        errors
    }

    /// Block unitary including its drawn errors, with rotation `shift.0` offset by `shift.1`.
    pub(crate) fn block_matrix(&self, circuit: &CompiledCircuit, l: usize, b: usize, shift: Option<(usize, f64)>) -> Mat2 {
        let errs = &self.after_rotation[l][b];
        if shift.is_none() && errs.iter().all(Option::is_none) {
            return circuit.block_matrices[l][b];
        }
        circuit.layers[l][b].rotations.iter().zip(errs).enumerate().fold(Mat2::IDENTITY, |acc, (k, (r, e))| {
            let angle = match shift {
                Some((i, d)) if i == k => r.angle + d,
                _ => r.angle,
            };
            let m = Mat2::rotation(r.axis, angle).mul(&acc);
            match e {
                Some(pauli) => pauli.mul(&m),
                None => m,
            }
        })
    }

    pub(crate) fn apply_block(&self, circuit: &CompiledCircuit, state: &mut Statevector, l: usize, b: usize) {
        state.apply_mat2_unchecked(circuit.layers[l][b].wire, &self.matrices[l][b]);
    }

    pub(crate) fn apply_entangler(&self, circuit: &CompiledCircuit, state: &mut Statevector, l: usize) {
        for (&(c, t), e) in circuit.cnots.iter().zip(&self.after_cnot[l]) {
            state.apply_cnot(c, t);
            if let Some(pauli) = e {
                state.apply_mat2_unchecked(t, pauli);
            }
        }
    }

    /// Continues from block `block` of layer `layer` to the end of the circuit.
    pub(crate) fn run_from(&self, circuit: &CompiledCircuit, state: &mut Statevector, layer: usize, block: usize) {
        for l in layer..circuit.layers.len() {
            let start = if l == layer { block } else { 0 };
            for b in start..circuit.layers[l].len() {
                self.apply_block(circuit, state, l, b);
            }
            self.apply_entangler(circuit, state, l);
        }
    }
}

/// One stochastic trajectory of `circuit` seeded by `seed`.
pub(crate) fn run_trajectory(circuit: &CompiledCircuit, noise: &NoiseConfig, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let errors = GateErrors::sample(circuit, noise.depolarizing_prob, &mut rng);
    let mut state = Statevector::new_zero_state(circuit.n_qubits).expect("validated layout");
    errors.run_from(circuit, &mut state, 0, 0);
    measure_with_readout(circuit, &state, noise, &mut rng)
}

pub(crate) fn measure_with_readout(
    circuit: &CompiledCircuit,
    state: &Statevector,
    noise: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let exact: Vec<f64> = circuit.observables.iter().map(|o| state.expect_pauli_unchecked(o.axis, o.qubit)).collect();
    sample_readout(&exact, noise, rng)
}

/// Shot and readout noise on top of exact expectations, one observable at a time.
pub(crate) fn sample_readout(exact: &[f64], noise: &NoiseConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let flip = noise.readout_flip_prob;
    exact
        .iter()
        .map(|&exact| match noise.shots {
            Shots::Exact if flip == 0.0 => exact,
            Shots::Exact => exact * (1.0 - 2.0 * flip),
            Shots::Count(n) => {
                let p_plus = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
                let p_read = p_plus * (1.0 - flip) + (1.0 - p_plus) * flip;
                let k = Binomial::new(n, p_read.clamp(0.0, 1.0))
                    .expect("probability clamped to [0, 1]")
                    .sample(rng);
                2.0 * k as f64 / n as f64 - 1.0
            }
        })
        .collect()
}

/// Noisy estimate of the layout's observables; deterministic per `noise.seed`.
///
/// With zero error rates and exact shots this is bit-identical to
/// [`crate::ansatz::evaluate`].
pub fn noisy_evaluate(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    noise: &NoiseConfig,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let circuit = CompiledCircuit::new(layout, params, input)?;
    Ok(run_trajectory(&circuit, noise, noise.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{evaluate, init_params, EntanglePattern, InitSpec, Observable};

    fn layout() -> CircuitLayout {
        CircuitLayout::new(3, 3, 2, EntanglePattern::Ring, (0..3).map(Observable::z).collect()).unwrap()
    }

    #[test]
    fn disabled_noise_is_bit_identical() {
        let l = layout();
        let p = init_params(&l, 3, &InitSpec { angle_range: 1.0, enc_scale: 0.7 });
        let x = [0.3, -0.2, 0.9];
        assert_eq!(noisy_evaluate(&l, &p, &x, &NoiseConfig::noiseless(9)).unwrap(), evaluate(&l, &p, &x).unwrap());
    }

    #[test]
    fn fully_random_readout_averages_to_zero() {
        let l = layout();
        let p = PqcParams::zeros(&l);
        let cfg = NoiseConfig { depolarizing_prob: 0.0, shots: Shots::Count(100_000), readout_flip_prob: 0.5, seed: 4 };
        let out = noisy_evaluate(&l, &p, &[0.0; 3], &cfg).unwrap();
        assert!(out.iter().all(|z| z.abs() < 0.02), "{out:?}");
    }

    #[test]
    fn readout_flip_biases_identity_circuit() {
        let l = CircuitLayout::new(1, 1, 1, EntanglePattern::Chain, vec![Observable::z(0)]).unwrap();
        let cfg = NoiseConfig { depolarizing_prob: 0.0, shots: Shots::Count(10_000), readout_flip_prob: 0.1, seed: 17 };
        let out = noisy_evaluate(&l, &PqcParams::zeros(&l), &[0.0], &cfg).unwrap();
        assert!((out[0] - 0.8).abs() < 0.03, "{}", out[0]);
    }

    #[test]
    fn seeded_runs_repeat() {
        let l = layout();
        let p = init_params(&l, 1, &InitSpec::default());
        let cfg = NoiseConfig { depolarizing_prob: 0.2, ..NoiseConfig::nisq(21) };
        let a = noisy_evaluate(&l, &p, &[0.1, 0.2, 0.3], &cfg).unwrap();
        let b = noisy_evaluate(&l, &p, &[0.1, 0.2, 0.3], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_validated() {
        let bad = NoiseConfig { depolarizing_prob: 1.5, ..NoiseConfig::nisq(0) };
        assert!(bad.validate().is_err());
        assert!("0".parse::<Shots>().is_err());
        assert_eq!("exact".parse::<Shots>(), Ok(Shots::Exact));
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(5, &[2, 3]), derive_seed(5, &[2, 3]));
    }
}
