//! Statevector kernels and gradient engines checked against independent oracles:
//! explicit 2^n × 2^n matrices built from Kronecker products, closed-form
//! single-qubit expectations, and central finite differences.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qdrl_core::ansatz::{evaluate, CircuitLayout, EntanglePattern, Observable, PqcParams};
use qdrl_core::gradients::{
    grad_adjoint, grad_finite_difference, grad_finite_difference_input, grad_input, grad_parameter_shift, vjp,
    AngleSelection, GradMethod,
};
use qdrl_core::qsim::{GateOp, PauliAxis, Statevector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(dim: usize) -> Matrix {
    (0..dim).map(|i| (0..dim).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn ry(t: f64) -> Matrix {
    let (s, co) = (t / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

fn rz(t: f64) -> Matrix {
    let (s, co) = (t / 2.0).sin_cos();
    vec![vec![c(co, -s), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, s)]]
}

fn pauli(axis: PauliAxis) -> Matrix {
    match axis {
        PauliAxis::X => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        PauliAxis::Z => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}

/// Embeds a single-qubit matrix on wire `q` of an n-qubit register (qubit 0 = least significant).
fn embed(n: usize, q: usize, m: &Matrix) -> Matrix {
    let eye = identity(2);
    (0..n).rev().fold(identity(1), |acc, wire| kron(&acc, if wire == q { m } else { &eye }))
}

/// CNOT as the permutation |…c…t…⟩ → |…c…(t⊕c)…⟩ on basis indices.
fn cnot_matrix(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for col in 0..dim {
        let row = if col >> control & 1 == 1 { col ^ (1 << target) } else { col };
        m[row][col] = c(1.0, 0.0);
    }
    m
}

fn gate_matrix(n: usize, g: &GateOp) -> Matrix {
    match *g {
        GateOp::Ry { target, angle } => embed(n, target, &ry(angle)),
        GateOp::Rz { target, angle } => embed(n, target, &rz(angle)),
        GateOp::Cnot { control, target } => cnot_matrix(n, control, target),
    }
}

fn zero_ket(n: usize) -> Vec<Complex64> {
    let mut v = vec![c(0.0, 0.0); 1 << n];
    v[0] = c(1.0, 0.0);
    v
}

fn oracle_expectation(n: usize, psi: &[Complex64], o: &Observable) -> f64 {
    let op = embed(n, o.qubit, &pauli(o.axis));
    let opsi = matvec(&op, psi);
    psi.iter().zip(&opsi).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

/// The ansatz written gate by gate, straight from its definition, as a matrix product.
fn oracle_evaluate(layout: &CircuitLayout, p: &PqcParams, x: &[f64]) -> Vec<f64> {
    let (n, m, layers) = (layout.n_qubits(), layout.n_inputs(), layout.n_layers());
    let mut u = identity(1 << n);
    let mut push = |g: GateOp| u = matmul(&gate_matrix(n, &g), &u);
    for l in 0..layers {
        for j in 0..n {
            if j < m {
                let a = (p.enc_scale_y[l * m + j] * x[j]).clamp(-PI, PI);
                let b = (p.enc_scale_z[l * m + j] * x[j]).clamp(-PI, PI);
                push(GateOp::Ry { target: j, angle: a });
                push(GateOp::Rz { target: j, angle: b });
            }
            push(GateOp::Rz { target: j, angle: p.rot_z[l * n + j] });
            push(GateOp::Ry { target: j, angle: p.rot_y[l * n + j] });
        }
        for q in 0..n.saturating_sub(1) {
            push(GateOp::Cnot { control: q, target: q + 1 });
        }
        if layout.entangle() == EntanglePattern::Ring && n >= 2 {
            push(GateOp::Cnot { control: n - 1, target: 0 });
        }
    }
    let psi = matvec(&u, &zero_ket(n));
    layout.observables().iter().map(|o| oracle_expectation(n, &psi, o)).collect()
}

fn random_gate(rng: &mut ChaCha8Rng, n: usize) -> GateOp {
    let target = rng.random_range(0..n);
    match (rng.random_range(0..3), n) {
        (0, _) | (2, 1) => GateOp::Ry { target, angle: rng.random_range(-PI..PI) },
        (1, _) => GateOp::Rz { target, angle: rng.random_range(-PI..PI) },
        _ => {
            let control = (target + rng.random_range(1..n)) % n;
            GateOp::Cnot { control, target }
        }
    }
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Statevector {
    let mut s = Statevector::new_zero_state(n).unwrap();
    for _ in 0..6 * n {
        s.apply(&random_gate(rng, n)).unwrap();
    }
    s
}

fn random_layout(rng: &mut ChaCha8Rng, max_qubits: usize, max_layers: usize) -> CircuitLayout {
    let n = rng.random_range(1..=max_qubits);
    let m = rng.random_range(1..=n);
    let layers = rng.random_range(1..=max_layers);
    let entangle = if rng.random_bool(0.5) { EntanglePattern::Chain } else { EntanglePattern::Ring };
    let n_obs = rng.random_range(1..=n.min(3));
    let observables = (0..n_obs)
        .map(|_| {
            let q = rng.random_range(0..n);
            if rng.random_bool(0.5) { Observable::z(q) } else { Observable::x(q) }
        })
        .collect();
    CircuitLayout::new(n, m, layers, entangle, observables).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, layout: &CircuitLayout) -> PqcParams {
    let mut p = PqcParams::zeros(layout);
    for v in p.enc_scale_y.iter_mut().chain(p.enc_scale_z.iter_mut()) {
        *v = rng.random_range(-1.5..1.5);
    }
    for v in p.rot_z.iter_mut().chain(p.rot_y.iter_mut()) {
        *v = rng.random_range(-PI..PI);
    }
    p
}

fn random_input(rng: &mut ChaCha8Rng, layout: &CircuitLayout) -> Vec<f64> {
    (0..layout.n_inputs()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn kernels_match_kronecker_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..=3 {
        for _ in 0..40 {
            let mut s = Statevector::new_zero_state(n).unwrap();
            let mut psi = zero_ket(n);
            for _ in 0..25 {
                let g = random_gate(&mut rng, n);
                s.apply(&g).unwrap();
                psi = matvec(&gate_matrix(n, &g), &psi);
            }
            for (a, b) in s.amplitudes().iter().zip(&psi) {
                assert!((a - b).norm() < 1e-12, "n={n}: {a} vs {b}");
            }
            for q in 0..n {
                for axis in [PauliAxis::X, PauliAxis::Z] {
                    let o = Observable { axis, qubit: q };
                    let want = oracle_expectation(n, &psi, &o);
                    assert!((s.expect_pauli(axis, q).unwrap() - want).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn ansatz_matches_matrix_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..60 {
        let layout = random_layout(&mut rng, 3, 3);
        let p = random_params(&mut rng, &layout);
        let x = random_input(&mut rng, &layout);
        let got = evaluate(&layout, &p, &x).unwrap();
        let want = oracle_evaluate(&layout, &p, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{layout:?}: {g} vs {w}");
        }
    }
}

#[test]
fn clamped_encoding_matches_oracle() {
    let layout = CircuitLayout::new(2, 2, 2, EntanglePattern::Ring, vec![Observable::z(0), Observable::x(1)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = random_params(&mut rng, &layout);
    p.enc_scale_y.iter_mut().for_each(|s| *s = 5.0);
    let x = [0.9, -0.8];
    let got = evaluate(&layout, &p, &x).unwrap();
    let want = oracle_evaluate(&layout, &p, &x);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-12);
    }
}

#[test]
fn zero_input_ignores_encoding_scales() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let layout = random_layout(&mut rng, 4, 3);
    let mut p = random_params(&mut rng, &layout);
    let x = vec![0.0; layout.n_inputs()];
    let before = evaluate(&layout, &p, &x).unwrap();
    p.enc_scale_y.iter_mut().for_each(|s| *s *= -3.7);
    p.enc_scale_z.iter_mut().for_each(|s| *s += 2.1);
    assert_eq!(before, evaluate(&layout, &p, &x).unwrap());
}

#[test]
fn three_way_gradient_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_fd, mut worst_adj, mut worst_in_fd, mut worst_in_adj) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..120 {
        let layout = random_layout(&mut rng, 6, 4);
        let p = random_params(&mut rng, &layout);
        let x = random_input(&mut rng, &layout);
        let ps = grad_parameter_shift(&layout, &p, &x).unwrap();
        let adj = grad_adjoint(&layout, &p, &x, None).unwrap();
        let fd = grad_finite_difference(&layout, &p, &x, 1e-5).unwrap();
        assert_eq!(ps.n_cols(), layout.n_params());
        worst_fd = worst_fd.max(ps.max_abs_diff(&fd));
        worst_adj = worst_adj.max(ps.max_abs_diff(&adj));

        let ps_in = grad_input(&layout, &p, &x).unwrap();
        let fd_in = grad_finite_difference_input(&layout, &p, &x, 1e-5).unwrap();
        let n_obs = layout.observables().len();
        for o in 0..n_obs {
            let mut w = vec![0.0; n_obs];
            w[o] = 1.0;
            let adj_in =
                vjp(&layout, &p, &x, &w, GradMethod::Adjoint, &AngleSelection::All, None).unwrap().inputs;
            for (j, a) in adj_in.iter().enumerate() {
                worst_in_adj = worst_in_adj.max((a - ps_in.get(o, j)).abs());
            }
        }
        worst_in_fd = worst_in_fd.max(ps_in.max_abs_diff(&fd_in));
    }
    assert!(worst_fd < 1e-6, "parameter-shift vs finite-difference: {worst_fd:e}");
    assert!(worst_adj < 1e-10, "parameter-shift vs adjoint: {worst_adj:e}");
    assert!(worst_in_fd < 1e-6, "input gradients vs finite-difference: {worst_in_fd:e}");
    assert!(worst_in_adj < 1e-10, "input gradients vs adjoint: {worst_in_adj:e}");
}

#[test]
fn shift_rule_matches_symbolic_single_qubit_derivatives() {
    // ⟨Z⟩ after R_Y(b)·R_Z(c)·R_Y(a)|0⟩ = cos a cos b − sin a sin b cos c,
    // with a = αx, c = βx + θ¹, b = θ².
    let layout = CircuitLayout::new(1, 1, 1, EntanglePattern::Chain, vec![Observable::z(0)]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (alpha, beta, t1, t2, x) = (
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(-PI..PI),
            rng.random_range(-PI..PI),
            rng.random_range(-1.0..1.0),
        );
        let p = PqcParams { enc_scale_y: vec![alpha], enc_scale_z: vec![beta], rot_z: vec![t1], rot_y: vec![t2] };
        let (a, b, cc) = (alpha * x, t2, beta * x + t1);
        let d_a = -a.sin() * b.cos() - a.cos() * b.sin() * cc.cos();
        let d_c = a.sin() * b.sin() * cc.sin();
        let d_b = -a.cos() * b.sin() - a.sin() * b.cos() * cc.cos();
        let want = [d_a * x, d_c * x, d_c, d_b];
        let g = grad_parameter_shift(&layout, &p, &[x]).unwrap();
        for (i, w) in want.iter().enumerate() {
            assert!((g.get(0, i) - w).abs() < 1e-12, "param {i}: {} vs {w}", g.get(0, i));
        }
        let gi = grad_input(&layout, &p, &[x]).unwrap();
        assert!((gi.get(0, 0) - (d_a * alpha + d_c * beta)).abs() < 1e-12);
    }
}

#[test]
fn gradient_of_weighted_observables_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let layout = random_layout(&mut rng, 5, 3);
        let p = random_params(&mut rng, &layout);
        let x = random_input(&mut rng, &layout);
        let w: Vec<f64> = layout.observables().iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        for method in [GradMethod::ParameterShift, GradMethod::Adjoint] {
            let direct = vjp(&layout, &p, &x, &w, method, &AngleSelection::All, None).unwrap();
            let jac = grad_parameter_shift(&layout, &p, &x).unwrap().contract(&w);
            for (a, b) in direct.params.iter().zip(&jac) {
                assert!((a - b).abs() < 1e-12, "{method}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn parallel_shift_evaluation_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let layout = random_layout(&mut rng, 6, 3);
    let p = random_params(&mut rng, &layout);
    let x = random_input(&mut rng, &layout);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| grad_parameter_shift(&layout, &p, &x).unwrap());
    let b = parallel.install(|| grad_parameter_shift(&layout, &p, &x).unwrap());
    assert_eq!(a, b);
}

#[test]
fn action_wire_selection_matches_full_input_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let layout = CircuitLayout::new(6, 6, 2, EntanglePattern::Ring, vec![Observable::x(0)]).unwrap();
    let p = random_params(&mut rng, &layout);
    let x = random_input(&mut rng, &layout);
    let full = grad_input(&layout, &p, &x).unwrap();
    let part = vjp(&layout, &p, &x, &[1.0], GradMethod::ParameterShift, &AngleSelection::Inputs(3..6), None).unwrap();
    for j in 3..6 {
        assert_eq!(part.inputs[j], full.get(0, j));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_preserved(seed in any::<u64>(), n in 1usize..=6, len in 1usize..=200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Statevector::new_zero_state(n).unwrap();
        for _ in 0..len {
            s.apply(&random_gate(&mut rng, n)).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_then_inverse_is_identity(seed in any::<u64>(), n in 1usize..=5, theta in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_state(&mut rng, n);
        let target = rng.random_range(0..n);
        for g in [GateOp::Ry { target, angle: theta }, GateOp::Rz { target, angle: theta }] {
            let mut s = start.clone();
            s.apply(&g).unwrap();
            s.apply(&g.inverse()).unwrap();
            for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cnot_is_an_involution(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_state(&mut rng, n);
        let target = rng.random_range(0..n);
        let control = (target + rng.random_range(1..n)) % n;
        let g = GateOp::Cnot { control, target };
        let mut s = start.clone();
        s.apply(&g).unwrap();
        s.apply(&g).unwrap();
        for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn expectations_are_bounded(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(&mut rng, n);
        for q in 0..n {
            for axis in [PauliAxis::X, PauliAxis::Z] {
                let e = s.expect_pauli(axis, q).unwrap();
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
            }
        }
    }

    #[test]
    fn evaluate_is_pure(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 5, 3);
        let p = random_params(&mut rng, &layout);
        let x = random_input(&mut rng, &layout);
        let a = evaluate(&layout, &p, &x).unwrap();
        let b = evaluate(&layout, &p, &x).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|v| v.abs() <= 1.0));
    }
}
