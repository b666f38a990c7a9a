//! Serializable description of a QPU: topology, basis gates, calibration
//! and timing budget.
//!
//! A [`HardwareModel`] is immutable once validated. Recalibration produces a
//! new value with a bumped [`HardwareModel::version`], which is what compiled
//! artifacts compare against to detect staleness.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::calib::{BenchmarkRecord, CalibrationSet, EdgeCalibration, QubitCalibration};
use crate::program::GateKind;

/// Nominal qubit frequency band in Hz.
pub const FREQUENCY_BAND: (f64, f64) = (4.0e9, 6.0e9);
/// Nominal anharmonicity band in Hz.
pub const ANHARMONICITY_BAND: (f64, f64) = (1.80e8, 1.90e8);
/// Coherence-limited upper bound on a single program execution.
pub const DEFAULT_MAX_PROGRAM_DURATION: f64 = 500e-6;
pub const DEFAULT_REPETITION_PERIOD: f64 = 1e-3;

/// Nominal calibration values used for generated models and as the reset
/// target of a calibration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalCalibration {
    pub t1: f64,
    pub t2: f64,
    pub single_qubit_fidelity: f64,
    pub two_qubit_fidelity: f64,
    pub readout_fidelity: f64,
    pub single_qubit_gate_duration: f64,
    pub two_qubit_gate_duration: f64,
    pub readout_duration: f64,
    pub mix_chamber_temperature: f64,
}

impl Default for NominalCalibration {
    fn default() -> Self {
        NominalCalibration {
            t1: 50e-6,
            t2: 60e-6,
            single_qubit_fidelity: 0.999,
            two_qubit_fidelity: 0.99,
            readout_fidelity: 0.98,
            single_qubit_gate_duration: 40e-9,
            two_qubit_gate_duration: 300e-9,
            readout_duration: 1e-6,
            mix_chamber_temperature: 0.010,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitSpec {
    pub index: usize,
    /// Hz.
    pub frequency: f64,
    /// Hz.
    pub anharmonicity: f64,
    /// Seconds.
    pub t1: f64,
    /// Seconds.
    pub t2: f64,
    pub readout_fidelity: f64,
    pub single_qubit_fidelity: f64,
}

/// Undirected coupler, stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingEdge {
    pub a: usize,
    pub b: usize,
    pub two_qubit_fidelity: f64,
    /// Seconds.
    pub gate_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub single_qubit_gate_duration: f64,
    pub readout_duration: f64,
    pub max_program_duration: f64,
    pub default_repetition_period: f64,
}

/// Calibration bookkeeping that is not a per-qubit or per-edge metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    /// Unix seconds of the last calibration run.
    pub timestamp: i64,
    /// Unix seconds of the last T2 measurement.
    pub t2_timestamp: i64,
    /// Kelvin.
    pub mix_chamber_temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareModel {
    pub name: String,
    pub qubits: Vec<QubitSpec>,
    pub edges: Vec<CouplingEdge>,
    pub basis_gates: BTreeSet<GateKind>,
    pub timing: Timing,
    pub version: u64,
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub enforce_bands: bool,
    pub calibration: CalibrationMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { severity: Severity::Error, path: path.into(), message: message.into() });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue { severity: Severity::Warning, path: path.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for issue in self.errors() {
            if !first {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.path, issue.message)?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid hardware model: {0}")]
    Invalid(ValidationReport),
    #[error("lattice needs at least 2 qubits, got {0}")]
    TooFewQubits(usize),
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit model")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
}

impl ModelError {
    /// Path of the first validation error, if any.
    pub fn path(&self) -> Option<&str> {
        match self {
            ModelError::Invalid(r) => r.errors().next().map(|i| i.path.as_str()),
            _ => None,
        }
    }
}

fn prob_ok(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl HardwareModel {
    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    /// Checks every structural and physical invariant of the model.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let n = self.qubits.len();
        if n == 0 {
            report.error("qubits", "model has no qubits");
        }
        if self.name.is_empty() {
            report.error("name", "empty model name");
        }
        for (k, q) in self.qubits.iter().enumerate() {
            let path = |field: &str| format!("qubits[{k}].{field}");
            if q.index != k {
                report.error(path("index"), format!("expected index {k}, found {}", q.index));
            }
            if !(q.t1 > 0.0 && q.t1.is_finite()) {
                report.error(path("t1"), "t1 must be positive");
            }
            if !(q.t2 > 0.0 && q.t2.is_finite()) {
                report.error(path("t2"), "t2 must be positive");
            } else if q.t2 > 2.0 * q.t1 {
                report.error(path("t2"), format!("t2 = {} exceeds 2*t1 = {}", q.t2, 2.0 * q.t1));
            }
            if !prob_ok(q.readout_fidelity) {
                report.error(path("readout_fidelity"), "probability outside [0, 1]");
            }
            if !prob_ok(q.single_qubit_fidelity) {
                report.error(path("single_qubit_fidelity"), "probability outside [0, 1]");
            }
            if self.enforce_bands {
                if !(FREQUENCY_BAND.0..=FREQUENCY_BAND.1).contains(&q.frequency) {
                    report.error(path("frequency"), format!("{} Hz outside declared band", q.frequency));
                }
                if !(ANHARMONICITY_BAND.0..=ANHARMONICITY_BAND.1).contains(&q.anharmonicity) {
                    report.error(path("anharmonicity"), format!("{} Hz outside declared band", q.anharmonicity));
                }
            }
        }

        let mut seen = BTreeSet::new();
        for (k, e) in self.edges.iter().enumerate() {
            let path = |field: &str| format!("edges[{k}].{field}");
            if e.a >= e.b {
                report.error(path("a"), format!("edge ({}, {}) must satisfy a < b", e.a, e.b));
            }
            if e.a >= n || e.b >= n {
                report.error(path("b"), format!("edge ({}, {}) references a missing qubit", e.a, e.b));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                report.error(path("a"), format!("duplicate edge ({}, {})", e.a, e.b));
            }
            if !prob_ok(e.two_qubit_fidelity) {
                report.error(path("two_qubit_fidelity"), "probability outside [0, 1]");
            }
            if !(e.gate_duration > 0.0 && e.gate_duration.is_finite()) {
                report.error(path("gate_duration"), "duration must be positive");
            }
        }

        if report.ok() && n > 0 && !self.is_connected() {
            report.error("edges", "coupling graph is not connected");
        }

        for g in [GateKind::Rz, GateKind::Sx] {
            if !self.basis_gates.contains(&g) {
                report.error("basis_gates", format!("basis must contain `{g}`"));
            }
        }
        if n > 1 && !self.basis_gates.contains(&GateKind::Cx) && !self.basis_gates.contains(&GateKind::Cz) {
            report.error("basis_gates", "basis needs an entangler (`cx` or `cz`)");
        }
        for g in [GateKind::Measure, GateKind::Barrier] {
            if self.basis_gates.contains(&g) {
                report.warn("basis_gates", format!("`{g}` is implicit and need not be listed"));
            }
        }

        let t = &self.timing;
        if !(t.max_program_duration > 0.0 && t.max_program_duration.is_finite()) {
            report.error("timing.max_program_duration", "must be positive");
        }
        if !(t.single_qubit_gate_duration >= 0.0 && t.single_qubit_gate_duration.is_finite()) {
            report.error("timing.single_qubit_gate_duration", "must be non-negative");
        }
        if !(t.readout_duration >= 0.0 && t.readout_duration.is_finite()) {
            report.error("timing.readout_duration", "must be non-negative");
        }
        if !(t.default_repetition_period > 0.0 && t.default_repetition_period.is_finite()) {
            report.error("timing.default_repetition_period", "must be positive");
        } else if t.default_repetition_period < t.max_program_duration {
            report.warn(
                "timing.default_repetition_period",
                "shorter than max_program_duration; long programs will be clamped up",
            );
        }
        if !prob_ok_temperature(self.calibration.mix_chamber_temperature) {
            report.error("calibration.mix_chamber_temperature", "temperature must be positive");
        }
        report
    }

    /// Returns `Ok(())` when [`validate`](Self::validate) reports no errors.
    pub fn check(&self) -> Result<(), ModelError> {
        let report = self.validate();
        if report.ok() {
            Ok(())
        } else {
            Err(ModelError::Invalid(report))
        }
    }

    pub fn coupling_map(&self) -> CouplingMap {
        CouplingMap::new(self.qubits.len(), self.edges.iter().map(|e| (e.a, e.b)))
    }

    pub fn is_connected(&self) -> bool {
        self.coupling_map().is_connected()
    }

    pub fn neighbors(&self, q: usize) -> Result<Vec<usize>, ModelError> {
        if q >= self.qubits.len() {
            return Err(ModelError::QubitOutOfRange { qubit: q, n_qubits: self.qubits.len() });
        }
        Ok(self.coupling_map().neighbors(q).to_vec())
    }

    pub fn edge(&self, a: usize, b: usize) -> Option<&CouplingEdge> {
        let (lo, hi) = (a.min(b), a.max(b));
        self.edges.iter().find(|e| e.a == lo && e.b == hi)
    }

    /// Current per-qubit and per-edge metrics as a calibration snapshot.
    pub fn calibration_set(&self) -> CalibrationSet {
        CalibrationSet {
            timestamp: self.calibration.timestamp,
            t2_timestamp: self.calibration.t2_timestamp,
            qubits: self
                .qubits
                .iter()
                .map(|q| QubitCalibration {
                    t1: q.t1,
                    t2: q.t2,
                    readout_fidelity: q.readout_fidelity,
                    single_qubit_fidelity: q.single_qubit_fidelity,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeCalibration { a: e.a, b: e.b, two_qubit_fidelity: e.two_qubit_fidelity })
                .collect(),
            mix_chamber_temperature: self.calibration.mix_chamber_temperature,
            benchmark: self.calibration.benchmark.clone(),
        }
    }

    /// Copies the metrics of `set` into a new model. The version is left
    /// untouched; callers that represent a recalibration bump it.
    pub fn with_calibration(&self, set: &CalibrationSet) -> HardwareModel {
        let mut out = self.clone();
        for (q, c) in out.qubits.iter_mut().zip(&set.qubits) {
            q.t1 = c.t1;
            q.t2 = c.t2;
            q.readout_fidelity = c.readout_fidelity;
            q.single_qubit_fidelity = c.single_qubit_fidelity;
        }
        for e in out.edges.iter_mut() {
            if let Some(c) = set.edges.iter().find(|c| c.a == e.a && c.b == e.b) {
                e.two_qubit_fidelity = c.two_qubit_fidelity;
            }
        }
        out.calibration = CalibrationMeta {
            timestamp: set.timestamp,
            t2_timestamp: set.t2_timestamp,
            mix_chamber_temperature: set.mix_chamber_temperature,
            benchmark: set.benchmark.clone(),
        };
        out
    }
}

fn prob_ok_temperature(t: f64) -> bool {
    t > 0.0 && t.is_finite()
}

/// Adjacency view of a coupling graph with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingMap {
    adjacency: Vec<Vec<usize>>,
}

impl CouplingMap {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> CouplingMap {
        let mut adjacency = vec![Vec::new(); n];
        for (a, b) in edges {
            if a < n && b < n && a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        CouplingMap { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adjacency[q]
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|n| n.binary_search(&b).is_ok())
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Hop distances from `src` (`usize::MAX` for unreachable qubits).
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.adjacency.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.adjacency.is_empty() || self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }
}

/// Number of columns used by the brick-wall embedding for `n` qubits: the
/// smallest even number not below `sqrt(2n)`, capped at `n`.
fn lattice_width(n: usize) -> usize {
    let mut w = 2;
    while w * w < 2 * n {
        w += 2;
    }
    w.min(n)
}

/// Edge list of the deterministic hexagonal (brick-wall) lattice on `n`
/// qubits. Qubits are laid out row-major; horizontal edges join neighbors
/// in a row and vertical rungs join `(r, c)` to `(r + 1, c)` when `r + c`
/// is even, so every qubit has at most one rung.
pub fn hex_lattice_edges(n: usize) -> Vec<(usize, usize)> {
    let w = lattice_width(n.max(1));
    let mut edges = Vec::new();
    for i in 0..n {
        let (r, c) = (i / w, i % w);
        if c + 1 < w && i + 1 < n {
            edges.push((i, i + 1));
        }
        if (r + c) % 2 == 0 && i + w < n {
            edges.push((i, i + w));
        }
    }
    // A lone qubit in a trailing row whose column has no rung would be
    // isolated; the qubit above it has spare degree (column 0 has one
    // horizontal neighbor).
    let last_row = (n - 1) / w;
    if n > w && n - last_row * w == 1 && (last_row - 1) % 2 == 1 {
        edges.push(((last_row - 1) * w, last_row * w));
    }
    edges.sort_unstable();
    edges
}

/// Generates a connected hexagonal-lattice model with nominal calibration.
pub fn generate_hex_lattice(n_qubits: usize) -> Result<HardwareModel, ModelError> {
    generate_hex_lattice_with(n_qubits, &NominalCalibration::default())
}

pub fn generate_hex_lattice_with(n_qubits: usize, nominal: &NominalCalibration) -> Result<HardwareModel, ModelError> {
    if n_qubits < 2 {
        return Err(ModelError::TooFewQubits(n_qubits));
    }
    let qubits = (0..n_qubits)
        .map(|i| QubitSpec {
            index: i,
            frequency: 4.5e9 + (i % 8) as f64 * 0.125e9,
            anharmonicity: 1.85e8,
            t1: nominal.t1,
            t2: nominal.t2,
            readout_fidelity: nominal.readout_fidelity,
            single_qubit_fidelity: nominal.single_qubit_fidelity,
        })
        .collect();
    let edges = hex_lattice_edges(n_qubits)
        .into_iter()
        .map(|(a, b)| CouplingEdge {
            a,
            b,
            two_qubit_fidelity: nominal.two_qubit_fidelity,
            gate_duration: nominal.two_qubit_gate_duration,
        })
        .collect();
    let model = HardwareModel {
        name: format!("hex{n_qubits}"),
        qubits,
        edges,
        basis_gates: default_basis(),
        timing: Timing {
            single_qubit_gate_duration: nominal.single_qubit_gate_duration,
            readout_duration: nominal.readout_duration,
            max_program_duration: DEFAULT_MAX_PROGRAM_DURATION,
            default_repetition_period: DEFAULT_REPETITION_PERIOD,
        },
        version: 1,
        enforce_bands: true,
        calibration: CalibrationMeta {
            timestamp: 0,
            t2_timestamp: 0,
            mix_chamber_temperature: nominal.mix_chamber_temperature,
            benchmark: None,
        },
    };
    model.check()?;
    Ok(model)
}

/// `{rz, sx, x, cx}`.
pub fn default_basis() -> BTreeSet<GateKind> {
    [GateKind::Rz, GateKind::Sx, GateKind::X, GateKind::Cx].into_iter().collect()
}

impl fmt::Display for HardwareModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let basis: Vec<String> = self.basis_gates.iter().map(|g| g.name().to_string()).collect();
        write!(
            f,
            "{} v{}: {} qubits, {} couplers, basis {{{}}}",
            self.name,
            self.version,
            self.qubits.len(),
            self.edges.len(),
            basis.join(",")
        )
    }
}
