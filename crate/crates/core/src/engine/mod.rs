//! Execution backends for timed programs: an echo stub and a statevector
//! emulator with shot sampling, plus the repetition-period wall-time model.

mod sample;
mod statevector;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use serde::{Deserialize, Serialize};

pub use sample::{histogram, sample_counts, sample_memory, MeasureMap, NORM_TOLERANCE};
pub use statevector::{engaged_qubits, simulate_statevector};

use crate::program::GateKind;
use crate::transpile::TimedProgram;
use statevector::{check_terminal_measurements, simulate_compressed, Compressed};

/// Largest statevector register the emulator will allocate.
pub const HARD_MAX_QUBITS: usize = 34;
pub const DEFAULT_MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Echo,
    Statevector,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Echo => "echo",
            EngineKind::Statevector => "statevector",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "echo" => Ok(EngineKind::Echo),
            "statevector" => Ok(EngineKind::Statevector),
            other => Err(format!("unknown engine `{other}` (expected echo or statevector)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kind: EngineKind,
    pub max_qubits: usize,
    pub rng_seed: u64,
}

impl EngineConfig {
    pub fn new(kind: EngineKind, max_qubits: usize, rng_seed: u64) -> Result<EngineConfig, EngineError> {
        if max_qubits > HARD_MAX_QUBITS {
            return Err(EngineError::CapTooLarge(max_qubits));
        }
        Ok(EngineConfig { kind, max_qubits, rng_seed })
    }

    pub fn echo(rng_seed: u64) -> EngineConfig {
        EngineConfig { kind: EngineKind::Echo, max_qubits: DEFAULT_MAX_QUBITS, rng_seed }
    }

    pub fn statevector(rng_seed: u64) -> EngineConfig {
        EngineConfig { kind: EngineKind::Statevector, max_qubits: DEFAULT_MAX_QUBITS, rng_seed }
    }

    pub fn with_seed(self, rng_seed: u64) -> EngineConfig {
        EngineConfig { rng_seed, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Counts,
    Memory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    /// Bitstring histogram; clbit 0 is the rightmost character.
    pub counts: BTreeMap<String, u64>,
    /// Per-shot bitstrings, present for [`OutputFormat::Memory`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<Vec<String>>,
    pub shots: u64,
    pub requested_repetition_period: Option<f64>,
    pub effective_period: f64,
    pub estimated_wall_time: f64,
    pub program_duration: f64,
    pub engine: String,
    pub seed: u64,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("shots must be at least 1")]
    NoShots,
    #[error("{active} active qubits exceed the emulator cap of {cap}")]
    QubitCapExceeded { active: usize, cap: usize },
    #[error("emulator cap {0} exceeds the hard limit of {HARD_MAX_QUBITS}")]
    CapTooLarge(usize),
    #[error("qubit {qubit} is used after being measured; only terminal measurement is supported")]
    MidCircuitMeasurement { qubit: usize },
    #[error("program still has unbound parameters")]
    UnboundParameters,
    #[error("repetition period must be positive and finite, got {0}")]
    InvalidRepetitionPeriod(f64),
    #[error("state norm {0} deviates from 1")]
    Unnormalized(f64),
}

/// `max(requested or default period, program duration)`.
pub fn effective_period(t: &TimedProgram, repetition_period: Option<f64>) -> f64 {
    repetition_period.unwrap_or(t.default_repetition_period).max(t.total_duration)
}

pub fn estimated_wall_time(shots: u64, effective_period: f64) -> f64 {
    shots as f64 * effective_period
}

/// Measured (state slot, clbit) pairs; a clbit written twice keeps the last
/// writer. Sorted by clbit.
fn measure_map(t: &TimedProgram, slot: &[usize]) -> Vec<(usize, usize)> {
    let mut by_clbit = BTreeMap::new();
    for ins in t.instructions.iter().filter(|i| i.op.kind == GateKind::Measure) {
        by_clbit.insert(ins.op.clbits[0], slot[ins.op.qubits[0]]);
    }
    by_clbit.into_iter().map(|(c, s)| (s, c)).collect()
}

pub fn execute(
    cfg: &EngineConfig,
    t: &TimedProgram,
    shots: u64,
    repetition_period: Option<f64>,
    format: OutputFormat,
) -> Result<ExecutionResult, EngineError> {
    if shots == 0 {
        return Err(EngineError::NoShots);
    }
    if let Some(p) = repetition_period {
        if !(p.is_finite() && p > 0.0) {
            return Err(EngineError::InvalidRepetitionPeriod(p));
        }
    }
    if !t.is_bound() {
        return Err(EngineError::UnboundParameters);
    }
    check_terminal_measurements(t)?;

    let compressed = Compressed::of(t);
    let map = measure_map(t, &compressed.slot);
    let memory = match cfg.kind {
        EngineKind::Echo => vec!["0".repeat(map.len()); shots as usize],
        EngineKind::Statevector => {
            let state = simulate_compressed(t, &compressed, cfg.max_qubits)?;
            sample_memory(&state, shots, &map, cfg.rng_seed)?
        }
    };
    let counts = histogram(&memory);
    let effective = effective_period(t, repetition_period);
    Ok(ExecutionResult {
        counts,
        memory: (format == OutputFormat::Memory).then_some(memory),
        shots,
        requested_repetition_period: repetition_period,
        effective_period: effective,
        estimated_wall_time: estimated_wall_time(shots, effective),
        program_duration: t.total_duration,
        engine: String::from(cfg.kind.name()),
        seed: cfg.rng_seed,
        model_version: t.model_version,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::generate_hex_lattice;
    use crate::qasm::parse_qasm2;
    use crate::transpile::transpile;

    const BELL: &str =
        "OPENQASM 2.0; include \"qelib1.inc\"; qreg q[2]; creg c[2]; h q[0]; cx q[0],q[1]; measure q -> c;";

    fn bell() -> TimedProgram {
        let m = generate_hex_lattice(32).unwrap();
        transpile(&parse_qasm2(BELL).unwrap(), &m, 0).unwrap().1
    }

    #[test]
    fn echo_returns_all_zeros() {
        let r = execute(&EngineConfig::echo(1), &bell(), 100, None, OutputFormat::Counts).unwrap();
        assert_eq!(r.counts.len(), 1);
        assert_eq!(r.counts["00"], 100);
        assert_eq!(r.engine, "echo");
    }

    #[test]
    fn bell_counts_are_correlated() {
        let r = execute(&EngineConfig::statevector(7), &bell(), 10_000, None, OutputFormat::Counts).unwrap();
        assert_eq!(r.counts.values().sum::<u64>(), 10_000);
        assert!(r.counts.keys().all(|k| k == "00" || k == "11"));
        for k in ["00", "11"] {
            assert!((r.counts[k] as f64 - 5000.0).abs() <= 150.0);
        }
    }

    #[test]
    fn wall_time_uses_max_rule() {
        let t = bell();
        let r = execute(&EngineConfig::echo(0), &t, 1000, Some(1e-3), OutputFormat::Counts).unwrap();
        assert_eq!(r.effective_period, 1e-3);
        assert_eq!(r.estimated_wall_time, 1.0);
        // period shorter than the program is clamped up
        let r = execute(&EngineConfig::echo(0), &t, 10, Some(1e-9), OutputFormat::Counts).unwrap();
        assert_eq!(r.effective_period, t.total_duration);
        // unset period falls back to the model default
        let r = execute(&EngineConfig::echo(0), &t, 10, None, OutputFormat::Counts).unwrap();
        assert_eq!(r.effective_period, 1e-3);
    }

    #[test]
    fn memory_format_lists_every_shot() {
        let r = execute(&EngineConfig::statevector(3), &bell(), 20, None, OutputFormat::Memory).unwrap();
        let mem = r.memory.unwrap();
        assert_eq!(mem.len(), 20);
        assert_eq!(histogram(&mem), r.counts);
    }

    #[test]
    fn bitstring_length_follows_measured_clbits() {
        let m = generate_hex_lattice(8).unwrap();
        let src = "qreg q[3]; creg c[5]; x q[2]; measure q[2] -> c[4]; measure q[0] -> c[1];";
        let t = transpile(&parse_qasm2(src).unwrap(), &m, 0).unwrap().1;
        let r = execute(&EngineConfig::statevector(0), &t, 5, None, OutputFormat::Counts).unwrap();
        assert_eq!(r.counts["10"], 5);
        let r = execute(&EngineConfig::echo(0), &t, 5, None, OutputFormat::Counts).unwrap();
        assert_eq!(r.counts["00"], 5);
    }

    #[test]
    fn argument_errors() {
        let t = bell();
        let sv = EngineConfig::statevector(0);
        assert_eq!(execute(&sv, &t, 0, None, OutputFormat::Counts).unwrap_err(), EngineError::NoShots);
        assert!(matches!(
            execute(&sv, &t, 1, Some(-1.0), OutputFormat::Counts),
            Err(EngineError::InvalidRepetitionPeriod(_))
        ));
        let tiny = EngineConfig::new(EngineKind::Statevector, 1, 0).unwrap();
        assert_eq!(
            execute(&tiny, &t, 1, None, OutputFormat::Counts).unwrap_err(),
            EngineError::QubitCapExceeded { active: 2, cap: 1 }
        );
        assert_eq!(EngineConfig::new(EngineKind::Statevector, 35, 0).unwrap_err(), EngineError::CapTooLarge(35));
    }

    #[test]
    fn engine_kind_parses() {
        assert_eq!("echo".parse::<EngineKind>().unwrap(), EngineKind::Echo);
        assert!("qpu".parse::<EngineKind>().is_err());
    }
}
