//! Brute-force dense-matrix oracle for circuit unitaries and a seeded random
//! program generator. Shared by the core property tests and the acceptance
//! suite; deliberately independent of the crate's own gate matrices.

#![allow(dead_code)]

use num_complex::Complex64 as C;
use qmio_core::program::{GateKind, GateOp, Param, Program};
use qmio_core::transpile::RoutedProgram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Matrix = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

fn phase(phi: f64) -> Matrix {
    vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), C::from_polar(1.0, phi)]]
}

fn hadamard() -> Matrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]]
}

/// Gate matrix in the textbook basis ordering, first operand as the most
/// significant bit of the local index. Phases follow qelib1 conventions and
/// may differ from the crate's by a global factor.
pub fn gate_matrix(kind: GateKind, angles: &[f64]) -> Matrix {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    match kind {
        GateKind::X => vec![vec![z, o], vec![o, z]],
        GateKind::H => hadamard(),
        // sqrt(X) = H S H
        GateKind::Sx => mul(&mul(&hadamard(), &phase(std::f64::consts::FRAC_PI_2)), &hadamard()),
        GateKind::Rz => phase(angles[0]),
        GateKind::U => {
            let (t, p, l) = (angles[0], angles[1], angles[2]);
            let ry = vec![
                vec![c((t / 2.0).cos(), 0.0), c(-(t / 2.0).sin(), 0.0)],
                vec![c((t / 2.0).sin(), 0.0), c((t / 2.0).cos(), 0.0)],
            ];
            mul(&mul(&phase(p), &ry), &phase(l))
        }
        GateKind::Cx => {
            let mut m = identity(4);
            m[2] = vec![z, z, z, o];
            m[3] = vec![z, z, o, z];
            m
        }
        GateKind::Cz => {
            let mut m = identity(4);
            m[3][3] = c(-1.0, 0.0);
            m
        }
        GateKind::Swap => {
            let mut m = identity(4);
            m[1] = vec![z, z, o, z];
            m[2] = vec![z, o, z, z];
            m
        }
        other => panic!("no matrix for {other}"),
    }
}

pub fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

/// Full `2^n x 2^n` matrix of `g` acting on `targets` (qubit 0 is the least
/// significant bit of the global index).
pub fn embed(g: &Matrix, targets: &[usize], n: usize) -> Matrix {
    let dim = 1usize << n;
    let k = targets.len();
    let local = |idx: usize| -> usize {
        targets.iter().enumerate().fold(0, |acc, (pos, &q)| acc | (((idx >> q) & 1) << (k - 1 - pos)))
    };
    let mask: usize = targets.iter().map(|&q| 1usize << q).sum();
    let mut out = vec![vec![c(0.0, 0.0); dim]; dim];
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                out[i][j] = g[local(i)][local(j)];
            }
        }
    }
    out
}

fn literal_angles(op: &GateOp) -> Vec<f64> {
    op.params.iter().map(|p| p.as_literal().expect("bound program")).collect()
}

/// Product of embedded gate matrices; measurements and barriers are skipped.
pub fn program_unitary(p: &Program) -> Matrix {
    let mut u = identity(1 << p.n_qubits);
    for op in &p.ops {
        if !op.kind.is_unitary() {
            continue;
        }
        let g = embed(&gate_matrix(op.kind, &literal_angles(op)), &op.qubits, p.n_qubits);
        u = mul(&g, &u);
    }
    u
}

/// Logical unitary implemented by a routed program: inputs enter through
/// the initial layout with every other physical qubit in |0>, outputs are
/// read through the final layout.
pub fn routed_logical_unitary(r: &RoutedProgram, n_logical: usize) -> Matrix {
    let w = program_unitary(&r.base);
    let place =
        |x: usize, layout: &[usize]| -> usize { (0..n_logical).fold(0, |acc, l| acc | (((x >> l) & 1) << layout[l])) };
    let dim = 1usize << n_logical;
    (0..dim).map(|y| (0..dim).map(|x| w[place(y, &r.final_layout)][place(x, &r.initial_layout)]).collect()).collect()
}

/// Frobenius distance between `a` and `b` minimised over a global phase.
pub fn phase_distance(a: &Matrix, b: &Matrix) -> f64 {
    let overlap: C = a.iter().zip(b).flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x.conj() * y)).sum();
    let ph = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { c(1.0, 0.0) };
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(move |(x, y)| (x * ph - y).norm_sqr()))
        .sum::<f64>()
        .sqrt()
}

const UNITARY_KINDS: [GateKind; 8] =
    [GateKind::U, GateKind::Rz, GateKind::Sx, GateKind::X, GateKind::H, GateKind::Cx, GateKind::Cz, GateKind::Swap];

/// Random unitary program on 1..=max_qubits qubits with at most `max_gates` gates.
pub fn random_program(seed: u64, max_qubits: usize, max_gates: usize) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_qubits);
    let gates = rng.random_range(0..=max_gates);
    let mut p = Program::new(n, 0);
    for _ in 0..gates {
        let kind = loop {
            let k = UNITARY_KINDS[rng.random_range(0..UNITARY_KINDS.len())];
            if n >= 2 || !k.is_two_qubit() {
                break k;
            }
        };
        let a = rng.random_range(0..n);
        let qubits = if kind.is_two_qubit() {
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            vec![a, b]
        } else {
            vec![a]
        };
        let params = (0..kind.param_count())
            .map(|_| Param::Literal(rng.random_range(-2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI)))
            .collect();
        p.push(GateOp::new(kind, qubits, params));
    }
    p
}
