//! Dense statevector simulation over the gate set {R_Y, R_Z, CNOT}.
//!
//! Qubit 0 is the least-significant bit of the amplitude index. Gate kernels
//! act in place on amplitude pairs selected by bit masks, so a single gate costs
//! O(2^n) and no full operator is ever materialised.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QuantumError, Result};

/// Largest register the simulator accepts (2^24 amplitudes, 256 MiB).
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Measurement axis for single-qubit Pauli observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Z,
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PauliAxis::X => f.write_str("X"),
            PauliAxis::Z => f.write_str("Z"),
        }
    }
}

/// Rotation generator for parameterised single-qubit gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationAxis {
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateOp {
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn rotation(axis: RotationAxis, target: usize, angle: f64) -> Self {
        match axis {
            RotationAxis::Y => GateOp::Ry { target, angle },
            RotationAxis::Z => GateOp::Rz { target, angle },
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            GateOp::Ry { target, .. } | GateOp::Rz { target, .. } | GateOp::Cnot { target, .. } => {
                target
            }
        }
    }

    /// Inverse gate (rotations negate their angle, CNOT is self-inverse).
    pub fn inverse(&self) -> Self {
        match *self {
            GateOp::Ry { target, angle } => GateOp::Ry { target, angle: -angle },
            GateOp::Rz { target, angle } => GateOp::Rz { target, angle: -angle },
            cnot @ GateOp::Cnot { .. } => cnot,
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |index: usize| {
            if index < n_qubits {
                Ok(())
            } else {
                Err(QuantumError::QubitIndex { index, n_qubits })
            }
        };
        match *self {
            GateOp::Ry { target, .. } | GateOp::Rz { target, .. } => check(target),
            GateOp::Cnot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target {
                    return Err(QuantumError::SameControlTarget(control));
                }
                Ok(())
            }
        }
    }
}

/// A 2×2 complex matrix in row-major order, used for single-qubit unitaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    /// R_Y(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
    pub fn ry(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Mat2([
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// R_Z(θ) = diag(e^{−iθ/2}, e^{iθ/2}).
    pub fn rz(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Mat2([[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]])
    }

    pub fn rotation(axis: RotationAxis, angle: f64) -> Self {
        match axis {
            RotationAxis::Y => Mat2::ry(angle),
            RotationAxis::Z => Mat2::rz(angle),
        }
    }

    pub fn pauli_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Mat2([[ZERO, -i], [i, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Mat2([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    pub fn adjoint(&self) -> Mat2 {
        let a = &self.0;
        Mat2([
            [a[0][0].conj(), a[1][0].conj()],
            [a[0][1].conj(), a[1][1].conj()],
        ])
    }

    pub fn scale(&self, factor: Complex64) -> Mat2 {
        let a = &self.0;
        Mat2([
            [a[0][0] * factor, a[0][1] * factor],
            [a[1][0] * factor, a[1][1] * factor],
        ])
    }
}

/// The quantum state |ψ⟩ of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// |0…0⟩ on `n_qubits` wires.
    pub fn new_zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QuantumError::Capacity(n_qubits));
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes; the length must be a power of two. No normalisation is applied.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QuantumError::Shape(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QuantumError::Capacity(n_qubits));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Resets to |0…0⟩ without reallocating.
    pub fn reset(&mut self) {
        self.amplitudes.fill(ZERO);
        self.amplitudes[0] = ONE;
    }

    pub fn copy_from(&mut self, other: &Statevector) {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        self.amplitudes.copy_from_slice(&other.amplitudes);
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index < self.n_qubits {
            Ok(())
        } else {
            Err(QuantumError::QubitIndex { index, n_qubits: self.n_qubits })
        }
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            GateOp::Ry { target, angle } => self.apply_ry(target, angle),
            GateOp::Rz { target, angle } => self.apply_rz(target, angle),
            GateOp::Cnot { control, target } => self.apply_cnot(control, target),
        }
        Ok(())
    }

    pub(crate) fn apply_ry(&mut self, target: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        let stride = 1 << target;
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x * c - y * s;
                *b = x * s + y * c;
            }
        }
    }

    pub(crate) fn apply_rz(&mut self, target: usize, angle: f64) {
        let (s, c) = (angle / 2.0).sin_cos();
        let phase0 = Complex64::new(c, -s);
        let phase1 = Complex64::new(c, s);
        let stride = 1 << target;
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            lo.iter_mut().for_each(|a| *a *= phase0);
            hi.iter_mut().for_each(|b| *b *= phase1);
        }
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let stride = 1 << target;
        let cmask = 1usize << control;
        for (block, chunk) in self.amplitudes.chunks_exact_mut(2 * stride).enumerate() {
            let base = block * 2 * stride;
            let (lo, hi) = chunk.split_at_mut(stride);
            if control > target {
                if base & cmask != 0 {
                    lo.swap_with_slice(hi);
                }
            } else {
                for (k, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    if (base + k) & cmask != 0 {
                        std::mem::swap(a, b);
                    }
                }
            }
        }
    }

    /// Applies an arbitrary 2×2 matrix to wire `target` (fused single-qubit blocks, Pauli errors).
    pub fn apply_mat2(&mut self, target: usize, m: &Mat2) -> Result<()> {
        self.check_qubit(target)?;
        self.apply_mat2_unchecked(target, m);
        Ok(())
    }

    pub(crate) fn apply_mat2_unchecked(&mut self, target: usize, m: &Mat2) {
        let [[m00, m01], [m10, m11]] = m.0;
        let stride = 1 << target;
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = m00 * x + m01 * y;
                *b = m10 * x + m11 * y;
            }
        }
    }

    /// Applies the Pauli operator itself (not a rotation) to wire `qubit`.
    pub(crate) fn apply_pauli_unchecked(&mut self, axis: PauliAxis, qubit: usize) {
        let stride = 1 << qubit;
        for chunk in self.amplitudes.chunks_exact_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            match axis {
                PauliAxis::X => lo.swap_with_slice(hi),
                PauliAxis::Z => hi.iter_mut().for_each(|b| *b = -*b),
            }
        }
    }

    /// Exact expectation ⟨ψ|P_qubit|ψ⟩ of a single-qubit Pauli.
    pub fn expect_pauli(&self, axis: PauliAxis, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(self.expect_pauli_unchecked(axis, qubit))
    }

    pub(crate) fn expect_pauli_unchecked(&self, axis: PauliAxis, qubit: usize) -> f64 {
        let stride = 1 << qubit;
        let mut acc = 0.0;
        for chunk in self.amplitudes.chunks_exact(2 * stride) {
            let (lo, hi) = chunk.split_at(stride);
            match axis {
                PauliAxis::Z => {
                    for (a, b) in lo.iter().zip(hi) {
                        acc += a.norm_sqr() - b.norm_sqr();
                    }
                }
                PauliAxis::X => {
                    for (a, b) in lo.iter().zip(hi) {
                        acc += 2.0 * (a.re * b.re + a.im * b.im);
                    }
                }
            }
        }
        acc.clamp(-1.0, 1.0)
    }

    /// self += w · other.
    pub(crate) fn axpy(&mut self, w: f64, other: &Statevector) {
        for (a, b) in self.amplitudes.iter_mut().zip(&other.amplitudes) {
            *a += b * w;
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Partial overlap on one wire: C[a][b] = Σ_rest conj(self[rest, a]) · other[rest, b].
    ///
    /// For any matrix M acting on `qubit`, ⟨self|M|other⟩ = Σ_ab M[a][b]·C[a][b].
    pub(crate) fn wire_overlap(&self, other: &Statevector, qubit: usize) -> [[Complex64; 2]; 2] {
        let stride = 1 << qubit;
        let mut c = [[ZERO; 2]; 2];
        for (l, r) in self
            .amplitudes
            .chunks_exact(2 * stride)
            .zip(other.amplitudes.chunks_exact(2 * stride))
        {
            let (l0, l1) = l.split_at(stride);
            let (r0, r1) = r.split_at(stride);
            for k in 0..stride {
                let (a0, a1) = (l0[k].conj(), l1[k].conj());
                let (b0, b1) = (r0[k], r1[k]);
                c[0][0] += a0 * b0;
                c[0][1] += a0 * b1;
                c[1][0] += a1 * b0;
                c[1][1] += a1 * b1;
            }
        }
        c
    }
}

/// Consuming form of [`Statevector::apply`].
pub fn apply_gate(mut state: Statevector, gate: &GateOp) -> Result<Statevector> {
    state.apply(gate)?;
    Ok(state)
}
