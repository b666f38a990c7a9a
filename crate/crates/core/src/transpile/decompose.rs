use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use super::TranspileError;
use crate::hardware::HardwareModel;
use crate::program::{GateKind, GateOp, Param, Program};

/// Whether `kind` can be expressed with `basis` (measure and barrier always can).
pub fn lowerable(kind: GateKind, basis: &BTreeSet<GateKind>) -> bool {
    if basis.contains(&kind) || !kind.is_unitary() {
        return true;
    }
    let has = |k| basis.contains(&k);
    match kind {
        GateKind::Rz | GateKind::Sx => false,
        GateKind::X => has(GateKind::Sx),
        GateKind::H | GateKind::U => has(GateKind::Rz) && has(GateKind::Sx),
        GateKind::Cx => has(GateKind::Cz) && lowerable(GateKind::H, basis),
        GateKind::Cz => has(GateKind::Cx) && lowerable(GateKind::H, basis),
        GateKind::Swap => lowerable(GateKind::Cx, basis),
        GateKind::Measure | GateKind::Barrier => true,
    }
}

fn rz(q: usize, angle: Param) -> GateOp {
    GateOp::new(GateKind::Rz, vec![q], vec![angle])
}

fn sx(q: usize) -> GateOp {
    GateOp::gate(GateKind::Sx, &[q])
}

/// Appends the basis expansion of `op` to `out`.
pub(crate) fn lower_op(op: &GateOp, basis: &BTreeSet<GateKind>, out: &mut Vec<GateOp>) -> Result<(), TranspileError> {
    if basis.contains(&op.kind) || !op.kind.is_unitary() {
        out.push(op.clone());
        return Ok(());
    }
    if !lowerable(op.kind, basis) {
        return Err(TranspileError::NoDecomposition(op.kind));
    }
    let q = &op.qubits;
    match op.kind {
        GateKind::X => {
            out.push(sx(q[0]));
            out.push(sx(q[0]));
        }
        GateKind::H => {
            out.push(rz(q[0], Param::Literal(FRAC_PI_2)));
            out.push(sx(q[0]));
            out.push(rz(q[0], Param::Literal(FRAC_PI_2)));
        }
        GateKind::U => {
            // U(theta, phi, lambda) = Rz(phi + pi) SX Rz(theta + pi) SX Rz(lambda), up to phase
            let (theta, phi, lambda) = (&op.params[0], &op.params[1], &op.params[2]);
            out.push(rz(q[0], lambda.clone()));
            out.push(sx(q[0]));
            out.push(rz(q[0], theta.add_offset(PI)));
            out.push(sx(q[0]));
            out.push(rz(q[0], phi.add_offset(PI)));
        }
        GateKind::Cx | GateKind::Cz => {
            let other = if op.kind == GateKind::Cx { GateKind::Cz } else { GateKind::Cx };
            let h = GateOp::gate(GateKind::H, &[q[1]]);
            lower_op(&h, basis, out)?;
            out.push(GateOp::gate(other, q));
            lower_op(&h, basis, out)?;
        }
        GateKind::Swap => {
            for pair in [[q[0], q[1]], [q[1], q[0]], [q[0], q[1]]] {
                lower_op(&GateOp::gate(GateKind::Cx, &pair), basis, out)?;
            }
        }
        GateKind::Rz | GateKind::Sx | GateKind::Measure | GateKind::Barrier => {
            unreachable!("handled by the basis/lowerable checks")
        }
    }
    Ok(())
}

/// Rewrites `program` so every gate is in the model basis (plus measure and
/// barrier). Equivalent to the input up to global phase.
pub fn decompose_to_basis(program: &Program, model: &HardwareModel) -> Result<Program, TranspileError> {
    let mut ops = Vec::with_capacity(program.ops.len());
    for op in &program.ops {
        lower_op(op, &model.basis_gates, &mut ops)?;
    }
    Ok(Program { ops, ..program.clone() })
}
