use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::EngineError;
use crate::math::{single_qubit_matrix, Mat2};
use crate::program::{GateKind, GateOp};
use crate::transpile::TimedProgram;

/// Qubits touched by unitaries or measurements, ascending. Barriers do not
/// count.
pub fn engaged_qubits(t: &TimedProgram) -> Vec<usize> {
    let mut used = vec![false; t.n_qubits];
    for ins in t.instructions.iter().filter(|i| i.op.kind != GateKind::Barrier) {
        for &q in &ins.op.qubits {
            used[q] = true;
        }
    }
    used.iter().enumerate().filter(|(_, &u)| u).map(|(q, _)| q).collect()
}

/// Compressed view of a timed program: only engaged qubits get a slot.
pub(crate) struct Compressed {
    /// Physical qubit of each slot.
    pub qubits: Vec<usize>,
    /// `slot[physical]`, `usize::MAX` for idle qubits.
    pub slot: Vec<usize>,
}

impl Compressed {
    pub fn of(t: &TimedProgram) -> Compressed {
        let qubits = engaged_qubits(t);
        let mut slot = vec![usize::MAX; t.n_qubits];
        for (i, &q) in qubits.iter().enumerate() {
            slot[q] = i;
        }
        Compressed { qubits, slot }
    }
}

fn apply_1q(state: &mut [Complex64], q: usize, m: &Mat2) {
    let bit = 1usize << q;
    for i in 0..state.len() {
        if i & bit == 0 {
            let (a, b) = (state[i], state[i | bit]);
            state[i] = m[0][0] * a + m[0][1] * b;
            state[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_op(state: &mut [Complex64], op: &GateOp, slots: &[usize]) -> Result<(), EngineError> {
    let q: Vec<usize> = op.qubits.iter().map(|&p| slots[p]).collect();
    match op.kind {
        GateKind::Measure | GateKind::Barrier => {}
        GateKind::Cx => {
            let (c, t) = (1usize << q[0], 1usize << q[1]);
            for i in 0..state.len() {
                if i & c != 0 && i & t == 0 {
                    state.swap(i, i | t);
                }
            }
        }
        GateKind::Cz => {
            let mask = (1usize << q[0]) | (1usize << q[1]);
            for (i, a) in state.iter_mut().enumerate() {
                if i & mask == mask {
                    *a = -*a;
                }
            }
        }
        GateKind::Swap => {
            let (a, b) = (1usize << q[0], 1usize << q[1]);
            for i in 0..state.len() {
                if i & a != 0 && i & b == 0 {
                    state.swap(i, (i & !a) | b);
                }
            }
        }
        kind => {
            let mut angles = [0.0f64; 3];
            for (slot, p) in angles.iter_mut().zip(&op.params) {
                *slot = p.as_literal().ok_or(EngineError::UnboundParameters)?;
            }
            let m = single_qubit_matrix(kind, &angles).expect("single-qubit kind");
            apply_1q(state, q[0], &m);
        }
    }
    Ok(())
}

/// Rejects a unitary acting on a qubit after that qubit was measured.
pub(crate) fn check_terminal_measurements(t: &TimedProgram) -> Result<(), EngineError> {
    let mut measured = vec![false; t.n_qubits];
    for ins in &t.instructions {
        match ins.op.kind {
            GateKind::Measure => measured[ins.op.qubits[0]] = true,
            GateKind::Barrier => {}
            _ => {
                if let Some(&q) = ins.op.qubits.iter().find(|&&q| measured[q]) {
                    return Err(EngineError::MidCircuitMeasurement { qubit: q });
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn simulate_compressed(
    t: &TimedProgram,
    c: &Compressed,
    max_qubits: usize,
) -> Result<Vec<Complex64>, EngineError> {
    let k = c.qubits.len();
    if k > max_qubits {
        return Err(EngineError::QubitCapExceeded { active: k, cap: max_qubits });
    }
    let mut state = vec![Complex64::new(0.0, 0.0); 1usize << k];
    state[0] = Complex64::new(1.0, 0.0);
    for ins in &t.instructions {
        apply_op(&mut state, &ins.op, &c.slot)?;
    }
    Ok(state)
}

/// Final state over all `t.n_qubits` qubits, qubit 0 as the least
/// significant index bit. Measurements are ignored.
pub fn simulate_statevector(t: &TimedProgram, max_qubits: usize) -> Result<Vec<Complex64>, EngineError> {
    if t.n_qubits > max_qubits {
        return Err(EngineError::QubitCapExceeded { active: t.n_qubits, cap: max_qubits });
    }
    let identity = Compressed { qubits: (0..t.n_qubits).collect(), slot: (0..t.n_qubits).collect() };
    simulate_compressed(t, &identity, max_qubits)
}
