use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decompose::lower_op;
use super::TranspileError;
use crate::hardware::HardwareModel;
use crate::program::{GateKind, GateOp, Program};

/// A basis-gate program over physical qubits whose two-qubit gates all act
/// on coupling-map edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedProgram {
    /// Program over the model's full physical index space.
    pub base: Program,
    /// `initial_layout[logical] = physical` at program start. Covers every
    /// physical qubit; indices past the logical width are idle placeholders.
    pub initial_layout: Vec<usize>,
    /// `final_layout[logical] = physical` after all inserted swaps.
    pub final_layout: Vec<usize>,
}

impl RoutedProgram {
    /// Physical qubit holding logical qubit `q` at the end of the program.
    pub fn final_physical(&self, q: usize) -> usize {
        self.final_layout[q]
    }
}

/// Greedy router: walks the first operand of each non-adjacent two-qubit
/// gate along a shortest coupling path, inserting swaps. Ties between
/// equally short next hops are broken by `seed`. The initial layout is the
/// identity.
pub fn route(program: &Program, model: &HardwareModel, seed: u64) -> Result<RoutedProgram, TranspileError> {
    let n_phys = model.n_qubits();
    if program.n_qubits > n_phys {
        return Err(TranspileError::TooManyQubits { needed: program.n_qubits, available: n_phys });
    }
    if let Some(op) = program.ops.iter().find(|op| op.kind.is_unitary() && !model.basis_gates.contains(&op.kind)) {
        return Err(TranspileError::NotInBasis(op.kind));
    }
    let map = model.coupling_map();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // layout[logical] = physical, occupant[physical] = logical
    let mut layout: Vec<usize> = (0..n_phys).collect();
    let mut occupant: Vec<usize> = (0..n_phys).collect();
    let mut ops = Vec::with_capacity(program.ops.len());

    for op in &program.ops {
        if op.kind.is_two_qubit() {
            let (mut pa, pb) = (layout[op.qubits[0]], layout[op.qubits[1]]);
            if !map.are_adjacent(pa, pb) {
                let dist = map.distances_from(pb);
                if dist[pa] == usize::MAX {
                    return Err(TranspileError::Unroutable { a: pa, b: pb });
                }
                while dist[pa] > 1 {
                    let hops: Vec<usize> =
                        map.neighbors(pa).iter().copied().filter(|&v| dist[v] + 1 == dist[pa]).collect();
                    let next = if hops.len() == 1 { hops[0] } else { hops[rng.random_range(0..hops.len())] };
                    lower_op(&GateOp::gate(GateKind::Swap, &[pa, next]), &model.basis_gates, &mut ops)?;
                    let (la, ln) = (occupant[pa], occupant[next]);
                    occupant.swap(pa, next);
                    layout[la] = next;
                    layout[ln] = pa;
                    pa = next;
                }
            }
        }
        let mut mapped = op.clone();
        for q in &mut mapped.qubits {
            *q = layout[*q];
        }
        ops.push(mapped);
    }

    Ok(RoutedProgram {
        base: Program { n_qubits: n_phys, n_clbits: program.n_clbits, ops, parameters: program.parameters.clone() },
        initial_layout: (0..n_phys).collect(),
        final_layout: layout,
    })
}

/// Every two-qubit op lies on a model edge.
pub fn is_coupling_valid(program: &Program, model: &HardwareModel) -> bool {
    let map = model.coupling_map();
    program.ops.iter().filter(|op| op.kind.is_two_qubit()).all(|op| map.are_adjacent(op.qubits[0], op.qubits[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::generate_hex_lattice;

    #[test]
    fn adjacent_pair_needs_no_swap() {
        let m = generate_hex_lattice(4).unwrap();
        let mut p = Program::new(2, 0);
        p.push(GateOp::gate(GateKind::Cx, &[0, 1]));
        let r = route(&p, &m, 0).unwrap();
        assert_eq!(r.base.ops, p.ops);
        assert_eq!(r.initial_layout, r.final_layout);
        assert_eq!(r.final_layout, (0..4).collect::<Vec<_>>());
    }

    #[test]
    fn line_distance_two_inserts_a_swap() {
        // hex3 is the line 0-1-2
        let m = generate_hex_lattice(3).unwrap();
        assert_eq!(m.edges.len(), 2);
        let mut p = Program::new(3, 0);
        p.push(GateOp::gate(GateKind::Cx, &[0, 2]));
        let r = route(&p, &m, 0).unwrap();
        assert!(r.base.ops.len() >= 4);
        assert!(is_coupling_valid(&r.base, &m));
        assert_eq!(r.final_layout[0], 1);
        assert_eq!(r.final_layout[1], 0);
    }

    #[test]
    fn non_basis_input_rejected() {
        let m = generate_hex_lattice(3).unwrap();
        let mut p = Program::new(1, 0);
        p.push(GateOp::gate(GateKind::H, &[0]));
        assert_eq!(route(&p, &m, 0).unwrap_err(), TranspileError::NotInBasis(GateKind::H));
    }

    #[test]
    fn oversized_program_rejected() {
        let m = generate_hex_lattice(3).unwrap();
        let p = Program::new(4, 0);
        assert_eq!(route(&p, &m, 0).unwrap_err(), TranspileError::TooManyQubits { needed: 4, available: 3 });
    }

    #[test]
    fn seed_determinism() {
        let m = generate_hex_lattice(32).unwrap();
        let mut p = Program::new(32, 0);
        for (a, b) in [(0, 31), (5, 27), (12, 3), (30, 1)] {
            p.push(GateOp::gate(GateKind::Cx, &[a, b]));
        }
        let a = route(&p, &m, 42).unwrap();
        assert_eq!(a, route(&p, &m, 42).unwrap());
        assert!(is_coupling_valid(&a.base, &m));
    }
}
