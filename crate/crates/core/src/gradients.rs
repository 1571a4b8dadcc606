//! Derivatives of PQC expectation values with respect to trainable parameters
//! and circuit inputs.
//!
//! Parameter-shift and adjoint both work at the level of individual rotation
//! angles and then scatter into parameter/input space by the chain rule:
//! a trainable angle maps 1:1 onto its parameter, an encoding angle
//! clamp(s·x) contributes `x·∂f/∂angle` to its scale `s` and `s·∂f/∂angle` to
//! its input `x` (both zero while the clamp is active).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{evaluate, AngleSource, CircuitLayout, CompiledCircuit, PqcParams, Rotation};
use crate::error::{QuantumError, Result};
use crate::noise::{derive_seed, measure_with_readout, sample_readout, GateErrors, NoiseConfig};
use crate::qsim::{Mat2, PauliAxis, RotationAxis, Statevector};

pub const DEFAULT_FD_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GradMethod {
    ParameterShift,
    Adjoint,
    FiniteDifference(f64),
}

impl GradMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GradMethod::ParameterShift => "parameter-shift",
            GradMethod::Adjoint => "adjoint",
            GradMethod::FiniteDifference(_) => "finite-diff",
        }
    }
}

impl fmt::Display for GradMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "parameter-shift" | "parameter_shift" => Ok(GradMethod::ParameterShift),
            "adjoint" => Ok(GradMethod::Adjoint),
            "finite-diff" | "finite_difference" => Ok(GradMethod::FiniteDifference(DEFAULT_FD_EPS)),
            other => match other.strip_prefix("finite-diff:").map(str::parse::<f64>) {
                Some(Ok(eps)) if eps > 0.0 && eps.is_finite() => Ok(GradMethod::FiniteDifference(eps)),
                _ => Err(format!(
                    "unknown gradient method `{other}` (expected parameter-shift, adjoint, finite-diff or finite-diff:<eps>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for GradMethod {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<GradMethod> for String {
    fn from(m: GradMethod) -> String {
        match m {
            GradMethod::FiniteDifference(eps) if eps != DEFAULT_FD_EPS => format!("finite-diff:{eps}"),
            other => other.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Parameters,
    Inputs,
}

#[derive(Debug, Clone, Copy)]
pub struct GradientRequest<'a> {
    pub layout: &'a CircuitLayout,
    pub params: &'a PqcParams,
    pub input: &'a [f64],
    pub method: GradMethod,
    pub wrt: Wrt,
}

/// Per-observable gradient matrix: one row per observable.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    n_cols: usize,
    data: Vec<f64>,
}

impl Jacobian {
    fn from_rows(rows: Vec<Vec<f64>>, n_cols: usize) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == n_cols));
        Self { n_cols, data: rows.into_iter().flatten().collect() }
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_cols).unwrap_or(0)
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, observable: usize) -> &[f64] {
        &self.data[observable * self.n_cols..(observable + 1) * self.n_cols]
    }

    pub fn get(&self, observable: usize, col: usize) -> f64 {
        self.data[observable * self.n_cols + col]
    }

    /// Σ_o weights[o] · row(o).
    pub fn contract(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_rows());
        let mut out = vec![0.0; self.n_cols];
        for (o, w) in weights.iter().enumerate() {
            for (acc, g) in out.iter_mut().zip(self.row(o)) {
                *acc += w * g;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Jacobian) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Which rotation angles a shift-based engine must differentiate.
#[derive(Debug, Clone)]
pub enum AngleSelection {
    All,
    /// Only encoding angles fed by inputs in the range (e.g. the critic's action wires).
    Inputs(Range<usize>),
}

impl AngleSelection {
    fn includes(&self, r: &Rotation) -> bool {
        match (self, r.source) {
            (AngleSelection::All, _) => true,
            (AngleSelection::Inputs(range), AngleSource::Encoded { input, .. }) => range.contains(&input),
            (AngleSelection::Inputs(_), AngleSource::Trainable { .. }) => false,
        }
    }
}

/// Gradient of Σ_o w_o ⟨O_o⟩ with respect to every parameter and every input.
#[derive(Debug, Clone, PartialEq)]
pub struct Vjp {
    pub params: Vec<f64>,
    pub inputs: Vec<f64>,
}

fn rotation_generator(axis: RotationAxis) -> Mat2 {
    match axis {
        RotationAxis::Y => Mat2::pauli_y(),
        RotationAxis::Z => Mat2::pauli_z(),
    }
}

/// Chain rule from per-angle derivatives to (parameter, input) gradients.
fn scatter(circuit: &CompiledCircuit, angle_grads: &[f64]) -> Vjp {
    let mut params = vec![0.0; circuit.n_params];
    let mut inputs = vec![0.0; circuit.n_inputs];
    for (r, &g) in circuit.rotations().zip(angle_grads) {
        match r.source {
            AngleSource::Trainable { param } => params[param] += g,
            AngleSource::Encoded { clamped: true, .. } => {}
            AngleSource::Encoded { param, input, scale, x, .. } => {
                params[param] += g * x;
                inputs[input] += g * scale;
            }
        }
    }
    Vjp { params, inputs }
}

/// ∂⟨O_o⟩/∂angle for every selected rotation by the ±π/2 shift rule.
/// Returns `n_rotations` rows of per-observable derivatives (zeros where unselected).
///
/// Shifted evaluations resume from the cached register state just before the
/// shifted block. Under noise all shifted evaluations of one call share a single
/// gate-error draw, and each evaluation samples its own shots and readout flips.
fn shift_angle_jacobian(
    circuit: &CompiledCircuit,
    selection: &AngleSelection,
    noise: Option<&NoiseConfig>,
) -> Vec<Vec<f64>> {
    let n_obs = circuit.observables.len();
    let errors = noise.map(|cfg| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[u64::MAX]));
        GateErrors::sample(circuit, cfg.depolarizing_prob, &mut rng)
    });
    let mut jobs = Vec::new();
    let mut state = Statevector::new_zero_state(circuit.n_qubits).expect("validated layout");
    let mut rot_index = 0;
    for (l, blocks) in circuit.layers.iter().enumerate() {
        for (b, block) in blocks.iter().enumerate() {
            let selected: Vec<usize> =
                (0..block.rotations.len()).filter(|&k| selection.includes(&block.rotations[k])).collect();
            if !selected.is_empty() {
                jobs.push(BlockJob { layer: l, block: b, selected, first: rot_index, before: state.clone() });
            }
            match &errors {
                Some(e) => e.apply_block(circuit, &mut state, l, b),
                None => state.apply_mat2_unchecked(block.wire, &circuit.block_matrices[l][b]),
            }
            rot_index += block.rotations.len();
        }
        match &errors {
            Some(e) => e.apply_entangler(circuit, &mut state, l),
            None => circuit.apply_entangler(&mut state),
        }
    }

    let derivs: Vec<(usize, Vec<f64>)> = jobs
        .par_iter()
        .flat_map_iter(|job| block_derivatives(circuit, errors.as_ref().zip(noise), job))
        .collect();

    let mut out = vec![vec![0.0; n_obs]; circuit.n_rotations()];
    for (idx, d) in derivs {
        out[idx] = d;
    }
    out
}

struct BlockJob {
    layer: usize,
    block: usize,
    selected: Vec<usize>,
    /// Rotation index of the block's first rotation.
    first: usize,
    /// Register state just before the block.
    before: Statevector,
}

fn block_derivatives(
    circuit: &CompiledCircuit,
    noisy: Option<(&GateErrors, &NoiseConfig)>,
    job: &BlockJob,
) -> Vec<(usize, Vec<f64>)> {
    let (l, b) = (job.layer, job.block);
    let block = &circuit.layers[l][b];
    // Two shifted passes per rotation cost more than four basis passes once three or more rotations are selected.
    let gram = match noisy {
        Some((e, _)) if job.selected.len() > 2 => Some(BlockGram::new(circuit, e, &job.before, l, b)),
        _ => None,
    };
    job.selected
        .iter()
        .map(|&k| {
            let idx = job.first + k;
            let eval = |delta: f64, sign_tag: u64| match noisy {
                Some((e, cfg)) => {
                    let m = e.block_matrix(circuit, l, b, Some((k, delta)));
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[idx as u64, sign_tag]));
                    match &gram {
                        Some(g) => sample_readout(&g.expectations(&m), cfg, &mut rng),
                        None => {
                            let mut s = job.before.clone();
                            s.apply_mat2_unchecked(block.wire, &m);
                            e.run_from(circuit, &mut s, l, b + 1);
                            measure_with_readout(circuit, &s, cfg, &mut rng)
                        }
                    }
                }
                None => {
                    let mut s = job.before.clone();
                    s.apply_mat2_unchecked(block.wire, &block.matrix_with_shift(Some((k, delta))));
                    circuit.run_from(&mut s, l, b + 1);
                    circuit.measure(&s)
                }
            };
            let plus = eval(FRAC_PI_2, 0);
            let minus = eval(-FRAC_PI_2, 1);
            (idx, plus.iter().zip(&minus).map(|(p, m)| 0.5 * (p - m)).collect())
        })
        .collect()
}

/// With the gate errors fixed, everything after block (l, b) is one unitary U, so
/// replacing the block's matrix by any X leaves the register in
/// Σ_ji X_ji · U(|j⟩⟨i| ⊗ 1)|a⟩. Keeping ⟨v_p|O|v_q⟩ for those four vectors gives
/// the exact expectation for every X without another pass over the circuit.
struct BlockGram {
    forms: Vec<[[Complex64; 4]; 4]>,
}

impl BlockGram {
    fn new(circuit: &CompiledCircuit, errors: &GateErrors, before: &Statevector, l: usize, b: usize) -> Self {
        let wire = circuit.layers[l][b].wire;
        let zero = Complex64::new(0.0, 0.0);
        let basis: Vec<Statevector> = (0..4)
            .map(|p| {
                let mut m = Mat2([[zero; 2]; 2]);
                m.0[p / 2][p % 2] = Complex64::new(1.0, 0.0);
                let mut v = before.clone();
                v.apply_mat2_unchecked(wire, &m);
                errors.run_from(circuit, &mut v, l, b + 1);
                v
            })
            .collect();
        let forms = circuit
            .observables
            .iter()
            .map(|o| {
                let mut h = [[zero; 4]; 4];
                for p in 0..4 {
                    for q in p..4 {
                        let c = basis[p].wire_overlap(&basis[q], o.qubit);
                        let v = match o.axis {
                            PauliAxis::Z => c[0][0] - c[1][1],
                            PauliAxis::X => c[0][1] + c[1][0],
                        };
                        h[p][q] = v;
                        h[q][p] = v.conj();
                    }
                }
                h
            })
            .collect();
        Self { forms }
    }

    fn expectations(&self, x: &Mat2) -> Vec<f64> {
        let c = [x.0[0][0], x.0[0][1], x.0[1][0], x.0[1][1]];
        self.forms
            .iter()
            .map(|h| {
                let mut acc = 0.0;
                for (p, row) in h.iter().enumerate() {
                    for (q, v) in row.iter().enumerate() {
                        acc += (c[p].conj() * c[q] * v).re;
                    }
                }
                acc.clamp(-1.0, 1.0)
            })
            .collect()
    }
}

/// ∂/∂angle of Σ_o w_o⟨O_o⟩ by one backward sweep over the stored final state.
fn adjoint_angle_grad(circuit: &CompiledCircuit, weights: &[f64]) -> Vec<f64> {
    let mut psi = circuit.forward();
    let mut lambda = Statevector::from_amplitudes(vec![Complex64::new(0.0, 0.0); psi.amplitudes().len()])
        .expect("same dimension as psi");
    for (o, &w) in circuit.observables.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let mut term = psi.clone();
        term.apply_pauli_unchecked(o.axis, o.qubit);
        lambda.axpy(w, &term);
    }

    let mut grads = vec![0.0; circuit.n_rotations()];
    let mut rot_end = grads.len();
    let half_i = Complex64::new(0.0, -0.5);
    for l in (0..circuit.layers.len()).rev() {
        for &(c, t) in circuit.cnots.iter().rev() {
            psi.apply_cnot(c, t);
            lambda.apply_cnot(c, t);
        }
        for (b, block) in circuit.layers[l].iter().enumerate().rev() {
            let n_rot = block.rotations.len();
            let start = rot_end - n_rot;
            let overlap = lambda.wire_overlap(&psi, block.wire);
            // `after` accumulates the product of rotations applied after rotation k.
            let mut after = Mat2::IDENTITY;
            for k in (0..n_rot).rev() {
                let r = &block.rotations[k];
                let d = after.mul(&rotation_generator(r.axis).scale(half_i)).mul(&after.adjoint());
                let mut z = Complex64::new(0.0, 0.0);
                for (row_d, row_c) in d.0.iter().zip(&overlap) {
                    for (dv, cv) in row_d.iter().zip(row_c) {
                        z += dv * cv;
                    }
                }
                grads[start + k] = 2.0 * z.re;
                after = after.mul(&r.matrix());
            }
            let inv = circuit.block_matrices[l][b].adjoint();
            psi.apply_mat2_unchecked(block.wire, &inv);
            lambda.apply_mat2_unchecked(block.wire, &inv);
            rot_end = start;
        }
    }
    grads
}

fn reject_noisy_adjoint(noise: Option<&NoiseConfig>) -> Result<()> {
    match noise {
        Some(cfg) if !cfg.is_noiseless() => Err(QuantumError::Unsupported(
            "adjoint differentiation needs the exact statevector and cannot run under a noise model".into(),
        )),
        _ => Ok(()),
    }
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn per_observable_scatter(
    circuit: &CompiledCircuit,
    angle_rows: impl Fn(usize) -> Vec<f64>,
    wrt: Wrt,
) -> Jacobian {
    let n_obs = circuit.observables.len();
    let rows: Vec<Vec<f64>> = (0..n_obs)
        .map(|o| {
            let v = scatter(circuit, &angle_rows(o));
            match wrt {
                Wrt::Parameters => v.params,
                Wrt::Inputs => v.inputs,
            }
        })
        .collect();
    let n_cols = match wrt {
        Wrt::Parameters => circuit.n_params,
        Wrt::Inputs => circuit.n_inputs,
    };
    Jacobian::from_rows(rows, n_cols)
}

fn shift_jacobian(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    wrt: Wrt,
    noise: Option<&NoiseConfig>,
) -> Result<Jacobian> {
    let circuit = CompiledCircuit::new(layout, params, input)?;
    let selection = match wrt {
        Wrt::Parameters => AngleSelection::All,
        Wrt::Inputs => AngleSelection::Inputs(0..circuit.n_inputs),
    };
    let per_angle = shift_angle_jacobian(&circuit, &selection, noise);
    Ok(per_observable_scatter(&circuit, |o| per_angle.iter().map(|row| row[o]).collect(), wrt))
}

/// ∂⟨O⟩/∂θ for every trainable parameter by the two-term shift rule.
pub fn grad_parameter_shift(layout: &CircuitLayout, params: &PqcParams, input: &[f64]) -> Result<Jacobian> {
    shift_jacobian(layout, params, input, Wrt::Parameters, None)
}

/// ∂⟨O⟩/∂x_j, shifting every encoding occurrence of x_j.
pub fn grad_input(layout: &CircuitLayout, params: &PqcParams, input: &[f64]) -> Result<Jacobian> {
    shift_jacobian(layout, params, input, Wrt::Inputs, None)
}

fn adjoint_jacobian(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    wrt: Wrt,
    noise: Option<&NoiseConfig>,
) -> Result<Jacobian> {
    reject_noisy_adjoint(noise)?;
    let circuit = CompiledCircuit::new(layout, params, input)?;
    let n_obs = circuit.observables.len();
    Ok(per_observable_scatter(&circuit, |o| adjoint_angle_grad(&circuit, &unit(n_obs, o)), wrt))
}

/// Parameter gradient by adjoint differentiation; rejected under an active noise model.
pub fn grad_adjoint(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    noise: Option<&NoiseConfig>,
) -> Result<Jacobian> {
    adjoint_jacobian(layout, params, input, Wrt::Parameters, noise)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(QuantumError::InvalidParameter(format!("finite-difference step must be > 0, got {eps}")))
    }
}

fn fd_jacobian(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    eps: f64,
    wrt: Wrt,
    noise: Option<&NoiseConfig>,
) -> Result<Jacobian> {
    check_eps(eps)?;
    let eval = |p: &PqcParams, x: &[f64], tag: u64| -> Result<Vec<f64>> {
        match noise {
            Some(cfg) => crate::noise::noisy_evaluate(layout, p, x, &cfg.reseeded(derive_seed(cfg.seed, &[tag]))),
            None => evaluate(layout, p, x),
        }
    };
    let n_obs = layout.observables().len();
    let (n_cols, base) = match wrt {
        Wrt::Parameters => (params.len(), params.to_flat()),
        Wrt::Inputs => (input.len(), input.to_vec()),
    };
    let mut cols = Vec::with_capacity(n_cols);
    for i in 0..n_cols {
        let shifted = |delta: f64, tag: u64| -> Result<Vec<f64>> {
            let mut v = base.clone();
            v[i] += delta;
            match wrt {
                Wrt::Parameters => eval(&PqcParams::from_flat(layout, &v)?, input, tag),
                Wrt::Inputs => eval(params, &v, tag),
            }
        };
        let plus = shifted(eps, 2 * i as u64)?;
        let minus = shifted(-eps, 2 * i as u64 + 1)?;
        cols.push(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * eps)).collect::<Vec<_>>());
    }
    let rows = (0..n_obs).map(|o| cols.iter().map(|c| c[o]).collect()).collect();
    Ok(Jacobian::from_rows(rows, n_cols))
}

/// Central differences (f(θ+ε) − f(θ−ε)) / 2ε over every parameter, evaluated
/// through [`evaluate`] only.
pub fn grad_finite_difference(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    eps: f64,
) -> Result<Jacobian> {
    fd_jacobian(layout, params, input, eps, Wrt::Parameters, None)
}

pub fn grad_finite_difference_input(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    eps: f64,
) -> Result<Jacobian> {
    fd_jacobian(layout, params, input, eps, Wrt::Inputs, None)
}

/// Dispatches a [`GradientRequest`]. `noise` switches shift-based methods to noisy
/// evaluations and makes adjoint requests fail.
pub fn differentiate(req: &GradientRequest<'_>, noise: Option<&NoiseConfig>) -> Result<Jacobian> {
    let noise = noise.filter(|n| !n.is_noiseless());
    if let Some(cfg) = noise {
        cfg.validate()?;
    }
    match req.method {
        GradMethod::ParameterShift => shift_jacobian(req.layout, req.params, req.input, req.wrt, noise),
        GradMethod::Adjoint => adjoint_jacobian(req.layout, req.params, req.input, req.wrt, noise),
        GradMethod::FiniteDifference(eps) => fd_jacobian(req.layout, req.params, req.input, eps, req.wrt, noise),
    }
}

/// Gradient of the weighted observable sum Σ_o w_o⟨O_o⟩.
///
/// With [`AngleSelection::Inputs`] only the listed input gradients are
/// meaningful; parameter gradients are then left at zero for shift-based methods.
pub fn vjp(
    layout: &CircuitLayout,
    params: &PqcParams,
    input: &[f64],
    weights: &[f64],
    method: GradMethod,
    selection: &AngleSelection,
    noise: Option<&NoiseConfig>,
) -> Result<Vjp> {
    if weights.len() != layout.observables().len() {
        return Err(QuantumError::Shape(format!(
            "{} weights for {} observables",
            weights.len(),
            layout.observables().len()
        )));
    }
    let noise = noise.filter(|n| !n.is_noiseless());
    match method {
        GradMethod::Adjoint => {
            reject_noisy_adjoint(noise)?;
            let circuit = CompiledCircuit::new(layout, params, input)?;
            Ok(scatter(&circuit, &adjoint_angle_grad(&circuit, weights)))
        }
        GradMethod::ParameterShift => {
            let circuit = CompiledCircuit::new(layout, params, input)?;
            let per_angle = shift_angle_jacobian(&circuit, selection, noise);
            let contracted: Vec<f64> =
                per_angle.iter().map(|row| row.iter().zip(weights).map(|(d, w)| d * w).sum()).collect();
            Ok(scatter(&circuit, &contracted))
        }
        GradMethod::FiniteDifference(eps) => {
            let p = fd_jacobian(layout, params, input, eps, Wrt::Parameters, noise)?;
            let x = fd_jacobian(layout, params, input, eps, Wrt::Inputs, noise)?;
            Ok(Vjp { params: p.contract(weights), inputs: x.contract(weights) })
        }
    }
}
