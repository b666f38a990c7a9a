use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::route::RoutedProgram;
use super::TranspileError;
use crate::hardware::HardwareModel;
use crate::program::{GateKind, GateOp, Program};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedInstruction {
    pub op: GateOp,
    /// Seconds from program start.
    pub start: f64,
    /// Seconds.
    pub duration: f64,
}

impl TimedInstruction {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Hardware-executable program with as-soon-as-possible start times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedProgram {
    /// Physical qubit count of the model the program was scheduled for.
    pub n_qubits: usize,
    pub n_clbits: usize,
    pub instructions: Vec<TimedInstruction>,
    pub total_duration: f64,
    pub model_version: u64,
    /// The model's repetition period, used when a job does not set one.
    pub default_repetition_period: f64,
}

impl TimedProgram {
    /// Sorted physical qubits touched by any instruction.
    pub fn active_qubits(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_qubits];
        for ins in &self.instructions {
            for &q in &ins.op.qubits {
                used[q] = true;
            }
        }
        used.iter().enumerate().filter(|(_, &u)| u).map(|(q, _)| q).collect()
    }

    pub fn is_bound(&self) -> bool {
        self.instructions.iter().all(|i| !i.op.is_symbolic())
    }
}

/// Duration of one op on `model`; `rz` is a zero-duration frame change.
pub fn op_duration(op: &GateOp, model: &HardwareModel) -> Result<f64, TranspileError> {
    Ok(match op.kind {
        GateKind::Rz | GateKind::Barrier => 0.0,
        GateKind::Measure => model.timing.readout_duration,
        k if k.is_two_qubit() => {
            let (a, b) = (op.qubits[0], op.qubits[1]);
            model.edge(a, b).ok_or(TranspileError::NotAnEdge { a, b })?.gate_duration
        }
        _ => model.timing.single_qubit_gate_duration,
    })
}

/// ASAP timing without the budget check; tolerates symbolic angles since
/// durations never depend on them.
pub(crate) fn schedule_ops(program: &Program, model: &HardwareModel) -> Result<TimedProgram, TranspileError> {
    if program.n_qubits > model.n_qubits() {
        return Err(TranspileError::TooManyQubits { needed: program.n_qubits, available: model.n_qubits() });
    }
    let mut ready = vec![0.0f64; program.n_qubits];
    let mut instructions = Vec::with_capacity(program.ops.len());
    let mut total = 0.0f64;
    for op in &program.ops {
        let duration = op_duration(op, model)?;
        let start = op.qubits.iter().map(|&q| ready[q]).fold(0.0, f64::max);
        let end = start + duration;
        for &q in &op.qubits {
            ready[q] = end;
        }
        total = total.max(end);
        instructions.push(TimedInstruction { op: op.clone(), start, duration });
    }
    Ok(TimedProgram {
        n_qubits: program.n_qubits,
        n_clbits: program.n_clbits,
        instructions,
        total_duration: total,
        model_version: model.version,
        default_repetition_period: model.timing.default_repetition_period,
    })
}

pub(crate) fn check_budget(t: &TimedProgram, model: &HardwareModel) -> Result<(), TranspileError> {
    if t.total_duration > model.timing.max_program_duration {
        return Err(TranspileError::DurationBudgetExceeded {
            total: t.total_duration,
            max: model.timing.max_program_duration,
        });
    }
    Ok(())
}

/// Assigns ASAP start times using the model's per-kind durations and
/// enforces the coherence budget.
pub fn schedule(routed: &RoutedProgram, model: &HardwareModel) -> Result<TimedProgram, TranspileError> {
    if routed.base.is_parametric() {
        return Err(TranspileError::UnboundParameters(routed.base.parameters.clone()));
    }
    let timed = schedule_ops(&routed.base, model)?;
    check_budget(&timed, model)?;
    Ok(timed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::generate_hex_lattice;
    use crate::qasm::parse_qasm2;
    use crate::transpile::{decompose_to_basis, route};

    fn timed(src: &str, model: &HardwareModel) -> Result<TimedProgram, TranspileError> {
        let p = decompose_to_basis(&parse_qasm2(src).unwrap(), model)?;
        schedule(&route(&p, model, 0)?, model)
    }

    #[test]
    fn bell_critical_path() {
        let m = generate_hex_lattice(32).unwrap();
        let t = timed("qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;", &m).unwrap();
        assert!((t.total_duration - 1.34e-6).abs() < 1e-15, "{}", t.total_duration);
        assert_eq!(t.model_version, m.version);
    }

    #[test]
    fn empty_program_takes_no_time() {
        let m = generate_hex_lattice(4).unwrap();
        let t = timed("qreg q[2];", &m).unwrap();
        assert_eq!(t.total_duration, 0.0);
        assert!(t.instructions.is_empty());
    }

    #[test]
    fn rz_is_virtual() {
        let m = generate_hex_lattice(2).unwrap();
        let t = timed("qreg q[1]; rz(0.3) q[0]; rz(0.2) q[0];", &m).unwrap();
        assert_eq!(t.total_duration, 0.0);
        assert_eq!(t.instructions.len(), 2);
    }

    #[test]
    fn long_cx_chain_exceeds_budget() {
        let m = generate_hex_lattice(2).unwrap();
        let mut src = alloc::string::String::from("qreg q[2];");
        for _ in 0..2000 {
            src.push_str("cx q[0],q[1];");
        }
        match timed(&src, &m) {
            Err(TranspileError::DurationBudgetExceeded { total, max }) => {
                assert!((total - 600e-6).abs() < 1e-9);
                assert_eq!(max, 500e-6);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn barrier_synchronises_qubits() {
        let m = generate_hex_lattice(2).unwrap();
        let t = timed("qreg q[2]; sx q[0]; sx q[0]; barrier q; sx q[1];", &m).unwrap();
        let last = t.instructions.last().unwrap();
        assert!((last.start - 80e-9).abs() < 1e-18);
    }

    #[test]
    fn off_edge_entangler_rejected() {
        let m = generate_hex_lattice(3).unwrap();
        let mut p = Program::new(3, 0);
        p.push(GateOp::gate(GateKind::Cx, &[0, 2]));
        let r = RoutedProgram { base: p, initial_layout: vec![0, 1, 2], final_layout: vec![0, 1, 2] };
        assert_eq!(schedule(&r, &m).unwrap_err(), TranspileError::NotAnEdge { a: 0, b: 2 });
    }
}
