//! Layered hardware-efficient ansatz with data re-uploading.
//!
//! Each layer ℓ applies, on wire j:
//!   R_Y(α_{ℓ,j}·x_j) then R_Z(β_{ℓ,j}·x_j)   (encoding, only on wires j < m)
//!   R_Z(θ¹_{ℓ,j})   then R_Y(θ²_{ℓ,j})       (trainable, every wire)
//! followed by the entangling block. The four rotations on a wire are fused into
//! one 2×2 block before being applied to the register.

use std::f64::consts::{FRAC_PI_8, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};
use crate::qsim::{Mat2, PauliAxis, RotationAxis, Statevector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntanglePattern {
    /// CNOT(q, q+1) for q = 0…n−2, ascending.
    #[default]
    Chain,
    /// Chain followed by CNOT(n−1, 0).
    Ring,
}

impl fmt::Display for EntanglePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntanglePattern::Chain => f.write_str("chain"),
            EntanglePattern::Ring => f.write_str("ring"),
        }
    }
}

impl FromStr for EntanglePattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "chain" => Ok(EntanglePattern::Chain),
            "ring" => Ok(EntanglePattern::Ring),
            other => Err(format!("unknown entangle pattern `{other}` (expected chain or ring)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observable {
    pub axis: PauliAxis,
    pub qubit: usize,
}

impl Observable {
    pub fn z(qubit: usize) -> Self {
        Self { axis: PauliAxis::Z, qubit }
    }

    pub fn x(qubit: usize) -> Self {
        Self { axis: PauliAxis::X, qubit }
    }
}

/// Immutable circuit topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct CircuitLayout {
    n_qubits: usize,
    n_inputs: usize,
    n_layers: usize,
    entangle: EntanglePattern,
    observables: Vec<Observable>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    n_qubits: usize,
    n_inputs: usize,
    n_layers: usize,
    entangle: EntanglePattern,
    observables: Vec<Observable>,
}

impl TryFrom<LayoutRepr> for CircuitLayout {
    type Error = QuantumError;

    fn try_from(r: LayoutRepr) -> Result<Self> {
        CircuitLayout::new(r.n_qubits, r.n_inputs, r.n_layers, r.entangle, r.observables)
    }
}

impl From<CircuitLayout> for LayoutRepr {
    fn from(l: CircuitLayout) -> Self {
        LayoutRepr {
            n_qubits: l.n_qubits,
            n_inputs: l.n_inputs,
            n_layers: l.n_layers,
            entangle: l.entangle,
            observables: l.observables,
        }
    }
}

impl CircuitLayout {
    pub fn new(
        n_qubits: usize,
        n_inputs: usize,
        n_layers: usize,
        entangle: EntanglePattern,
        observables: Vec<Observable>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::qsim::MAX_QUBITS {
            return Err(QuantumError::Capacity(n_qubits));
        }
        if n_inputs == 0 || n_inputs > n_qubits {
            return Err(QuantumError::Shape(format!(
                "{n_inputs} inputs cannot be encoded on {n_qubits} qubits"
            )));
        }
        if n_layers == 0 {
            return Err(QuantumError::Shape("at least one layer is required".into()));
        }
        if observables.is_empty() {
            return Err(QuantumError::Shape("at least one observable is required".into()));
        }
        if let Some(o) = observables.iter().find(|o| o.qubit >= n_qubits) {
            return Err(QuantumError::QubitIndex { index: o.qubit, n_qubits });
        }
        Ok(Self { n_qubits, n_inputs, n_layers, entangle, observables })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn entangle(&self) -> EntanglePattern {
        self.entangle
    }

    pub fn observables(&self) -> &[Observable] {
        &self.observables
    }

    /// 2·L·m encoding scales plus 2·L·n trainable angles.
    pub fn n_params(&self) -> usize {
        2 * self.n_layers * self.n_inputs + 2 * self.n_layers * self.n_qubits
    }

    /// CNOT (control, target) pairs of one entangling block, in application order.
    pub fn entangling_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_qubits;
        let mut pairs: Vec<_> = (0..n.saturating_sub(1)).map(|q| (q, q + 1)).collect();
        if self.entangle == EntanglePattern::Ring && n >= 2 {
            pairs.push((n - 1, 0));
        }
        pairs
    }

    /// Same topology with a different observable set.
    pub fn with_observables(&self, observables: Vec<Observable>) -> Result<Self> {
        Self::new(self.n_qubits, self.n_inputs, self.n_layers, self.entangle, observables)
    }
}

/// Trainable arrays of a PQC, stored row-major by (layer, wire).
///
/// Flat parameter order: `enc_scale_y`, `enc_scale_z`, `rot_z`, `rot_y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PqcParams {
    pub enc_scale_y: Vec<f64>,
    pub enc_scale_z: Vec<f64>,
    pub rot_z: Vec<f64>,
    pub rot_y: Vec<f64>,
}

impl PqcParams {
    pub fn zeros(layout: &CircuitLayout) -> Self {
        let enc = layout.n_layers * layout.n_inputs;
        let rot = layout.n_layers * layout.n_qubits;
        Self {
            enc_scale_y: vec![0.0; enc],
            enc_scale_z: vec![0.0; enc],
            rot_z: vec![0.0; rot],
            rot_y: vec![0.0; rot],
        }
    }

    pub fn len(&self) -> usize {
        self.enc_scale_y.len() + self.enc_scale_z.len() + self.rot_z.len() + self.rot_y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, layout: &CircuitLayout) -> Result<()> {
        let enc = layout.n_layers * layout.n_inputs;
        let rot = layout.n_layers * layout.n_qubits;
        let shapes = [
            ("enc_scale_y", self.enc_scale_y.len(), enc),
            ("enc_scale_z", self.enc_scale_z.len(), enc),
            ("rot_z", self.rot_z.len(), rot),
            ("rot_y", self.rot_y.len(), rot),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(QuantumError::Shape(format!("{name} has {got} entries, layout needs {want}")));
            }
        }
        if let Some(i) = self.to_flat().iter().position(|v| !v.is_finite()) {
            return Err(QuantumError::InvalidParameter(format!("parameter {i} is not finite")));
        }
        Ok(())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend_from_slice(&self.enc_scale_y);
        out.extend_from_slice(&self.enc_scale_z);
        out.extend_from_slice(&self.rot_z);
        out.extend_from_slice(&self.rot_y);
        out
    }

    pub fn from_flat(layout: &CircuitLayout, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(layout);
        if flat.len() != p.len() {
            return Err(QuantumError::Shape(format!(
                "flat vector has {} entries, layout needs {}",
                flat.len(),
                p.len()
            )));
        }
        p.set_flat(flat);
        Ok(p)
    }

    /// Overwrites all entries from a flat slice of matching length.
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length mismatch");
        let mut rest = flat;
        for part in [&mut self.enc_scale_y, &mut self.enc_scale_z, &mut self.rot_z, &mut self.rot_y] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.to_flat()[index]
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let mut flat = self.to_flat();
        flat[index] = value;
        self.set_flat(&flat);
    }
}

/// Parameter initialisation recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    /// Rotation angles are drawn uniformly from [−angle_range, angle_range].
    pub angle_range: f64,
    pub enc_scale: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self { angle_range: FRAC_PI_8, enc_scale: 1.0 }
    }
}

pub fn init_params(layout: &CircuitLayout, seed: u64, spec: &InitSpec) -> PqcParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = PqcParams::zeros(layout);
    p.enc_scale_y.fill(spec.enc_scale);
    p.enc_scale_z.fill(spec.enc_scale);
    let range = spec.angle_range.abs();
    for v in p.rot_z.iter_mut().chain(p.rot_y.iter_mut()) {
        *v = if range == 0.0 { 0.0 } else { rng.random_range(-range..=range) };
    }
    p
}

/// Exact expectation values of the layout's observables.
pub fn evaluate(layout: &CircuitLayout, params: &PqcParams, input: &[f64]) -> Result<Vec<f64>> {
    let circuit = CompiledCircuit::new(layout, params, input)?;
    Ok(circuit.measure(&circuit.forward()))
}

/// Where a rotation angle comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum AngleSource {
    Trainable { param: usize },
    /// angle = clamp(scale · x, −π, π); the scale is flat parameter `param`.
    Encoded { param: usize, input: usize, scale: f64, x: f64, clamped: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Rotation {
    pub axis: RotationAxis,
    pub angle: f64,
    pub source: AngleSource,
}

impl Rotation {
    pub fn matrix(&self) -> Mat2 {
        Mat2::rotation(self.axis, self.angle)
    }
}

/// The rotations on one wire within one layer, in application order.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub wire: usize,
    pub rotations: Vec<Rotation>,
}

impl Block {
    /// Fused unitary of the block, with rotation `shift.0` offset by `shift.1`.
    pub fn matrix_with_shift(&self, shift: Option<(usize, f64)>) -> Mat2 {
        self.rotations.iter().enumerate().fold(Mat2::IDENTITY, |acc, (k, r)| {
            let angle = match shift {
                Some((idx, delta)) if idx == k => r.angle + delta,
                _ => r.angle,
            };
            Mat2::rotation(r.axis, angle).mul(&acc)
        })
    }

    pub fn matrix(&self) -> Mat2 {
        self.matrix_with_shift(None)
    }
}

/// A layout bound to concrete parameters and input: the gate list ready to run.
#[derive(Debug, Clone)]
pub(crate) struct CompiledCircuit {
    pub n_qubits: usize,
    pub layers: Vec<Vec<Block>>,
    pub block_matrices: Vec<Vec<Mat2>>,
    pub cnots: Vec<(usize, usize)>,
    pub observables: Vec<Observable>,
    pub n_params: usize,
    pub n_inputs: usize,
}

impl CompiledCircuit {
    pub fn new(layout: &CircuitLayout, params: &PqcParams, input: &[f64]) -> Result<Self> {
        params.validate(layout)?;
        if input.len() != layout.n_inputs {
            return Err(QuantumError::Shape(format!(
                "input has {} components, layout encodes {}",
                input.len(),
                layout.n_inputs
            )));
        }
        if let Some(i) = input.iter().position(|x| !x.is_finite()) {
            return Err(QuantumError::NonFiniteInput(i));
        }
        let (l_count, m, n) = (layout.n_layers, layout.n_inputs, layout.n_qubits);
        let enc_z_offset = l_count * m;
        let rot_z_offset = 2 * l_count * m;
        let rot_y_offset = rot_z_offset + l_count * n;
        let encoded = |param: usize, input: usize, scale: f64, x: f64, axis| {
            let raw = scale * x;
            Rotation {
                axis,
                angle: raw.clamp(-PI, PI),
                source: AngleSource::Encoded { param, input, scale, x, clamped: raw.abs() > PI },
            }
        };
        let mut layers = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let mut blocks = Vec::with_capacity(n);
            for wire in 0..n {
                let mut rotations = Vec::with_capacity(4);
                if wire < m {
                    let ey = l * m + wire;
                    let ez = enc_z_offset + l * m + wire;
                    let x = input[wire];
                    rotations.push(encoded(ey, wire, params.enc_scale_y[l * m + wire], x, RotationAxis::Y));
                    rotations.push(encoded(ez, wire, params.enc_scale_z[l * m + wire], x, RotationAxis::Z));
                }
                let rz = rot_z_offset + l * n + wire;
                let ry = rot_y_offset + l * n + wire;
                rotations.push(Rotation {
                    axis: RotationAxis::Z,
                    angle: params.rot_z[l * n + wire],
                    source: AngleSource::Trainable { param: rz },
                });
                rotations.push(Rotation {
                    axis: RotationAxis::Y,
                    angle: params.rot_y[l * n + wire],
                    source: AngleSource::Trainable { param: ry },
                });
                blocks.push(Block { wire, rotations });
            }
            layers.push(blocks);
        }
        let block_matrices = layers
            .iter()
            .map(|blocks| blocks.iter().map(Block::matrix).collect())
            .collect();
        Ok(Self {
            n_qubits: n,
            layers,
            block_matrices,
            cnots: layout.entangling_pairs(),
            observables: layout.observables.clone(),
            n_params: layout.n_params(),
            n_inputs: m,
        })
    }

    pub fn n_rotations(&self) -> usize {
        self.layers.iter().flatten().map(|b| b.rotations.len()).sum()
    }

    /// Rotations in circuit order, flattened.
    pub fn rotations(&self) -> impl Iterator<Item = &Rotation> {
        self.layers.iter().flatten().flat_map(|b| b.rotations.iter())
    }

    pub fn apply_entangler(&self, state: &mut Statevector) {
        for &(c, t) in &self.cnots {
            state.apply_cnot(c, t);
        }
    }

    /// Runs blocks from (layer, block) onwards; the remaining part of that layer, then later layers.
    pub fn run_from(&self, state: &mut Statevector, layer: usize, block: usize) {
        for l in layer..self.layers.len() {
            let start = if l == layer { block } else { 0 };
            for (b, m) in self.layers[l].iter().zip(&self.block_matrices[l]).skip(start) {
                state.apply_mat2_unchecked(b.wire, m);
            }
            self.apply_entangler(state);
        }
    }

    pub fn forward(&self) -> Statevector {
        let mut state = Statevector::new_zero_state(self.n_qubits).expect("layout validated");
        self.run_from(&mut state, 0, 0);
        state
    }

    pub fn measure(&self, state: &Statevector) -> Vec<f64> {
        self.observables
            .iter()
            .map(|o| state.expect_pauli_unchecked(o.axis, o.qubit))
            .collect()
    }
}
