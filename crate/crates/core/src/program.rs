//! Logical circuit IR shared by the frontend, transpiler and engines.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Gate vocabulary understood by every stage of the toolchain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    U,
    Rz,
    Sx,
    X,
    H,
    Cx,
    Cz,
    Swap,
    Measure,
    Barrier,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::U,
        GateKind::Rz,
        GateKind::Sx,
        GateKind::X,
        GateKind::H,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Swap,
        GateKind::Measure,
        GateKind::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::U => "u",
            GateKind::Rz => "rz",
            GateKind::Sx => "sx",
            GateKind::X => "x",
            GateKind::H => "h",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
            GateKind::Measure => "measure",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Number of qubit operands, `None` for the variadic barrier.
    pub fn qubit_arity(self) -> Option<usize> {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Swap => Some(2),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn param_count(self) -> usize {
        match self {
            GateKind::U => 3,
            GateKind::Rz => 1,
            _ => 0,
        }
    }

    pub fn is_two_qubit(self) -> bool {
        self.qubit_arity() == Some(2)
    }

    /// True for unitary gate kinds (everything except measure and barrier).
    pub fn is_unitary(self) -> bool {
        !matches!(self, GateKind::Measure | GateKind::Barrier)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A gate angle: either a literal in radians or the affine form
/// `scale * <parameter> + offset` of a named symbolic parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Param {
    Literal(f64),
    Symbol { name: String, scale: f64, offset: f64 },
}

impl Param {
    pub fn symbol(name: impl Into<String>) -> Param {
        Param::Symbol { name: name.into(), scale: 1.0, offset: 0.0 }
    }

    pub fn as_literal(&self) -> Option<f64> {
        match self {
            Param::Literal(v) => Some(*v),
            Param::Symbol { .. } => None,
        }
    }

    pub fn symbol_name(&self) -> Option<&str> {
        match self {
            Param::Symbol { name, .. } => Some(name),
            Param::Literal(_) => None,
        }
    }

    pub fn add_offset(&self, delta: f64) -> Param {
        match self {
            Param::Literal(v) => Param::Literal(v + delta),
            Param::Symbol { name, scale, offset } => {
                Param::Symbol { name: name.clone(), scale: *scale, offset: offset + delta }
            }
        }
    }

    /// Resolves the angle with `lookup`, returning `None` for an unknown symbol.
    pub fn resolve(&self, lookup: impl Fn(&str) -> Option<f64>) -> Option<f64> {
        match self {
            Param::Literal(v) => Some(*v),
            Param::Symbol { name, scale, offset } => lookup(name).map(|v| scale * v + offset),
        }
    }
}

/// One operation in program order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    /// Target classical bits; only populated for `measure`.
    pub clbits: Vec<usize>,
    pub params: Vec<Param>,
}

impl GateOp {
    pub fn new(kind: GateKind, qubits: Vec<usize>, params: Vec<Param>) -> GateOp {
        GateOp { kind, qubits, clbits: Vec::new(), params }
    }

    pub fn gate(kind: GateKind, qubits: &[usize]) -> GateOp {
        GateOp::new(kind, qubits.to_vec(), Vec::new())
    }

    pub fn rz(q: usize, angle: f64) -> GateOp {
        GateOp::new(GateKind::Rz, alloc::vec![q], alloc::vec![Param::Literal(angle)])
    }

    pub fn u(q: usize, theta: f64, phi: f64, lambda: f64) -> GateOp {
        GateOp::new(
            GateKind::U,
            alloc::vec![q],
            alloc::vec![Param::Literal(theta), Param::Literal(phi), Param::Literal(lambda)],
        )
    }

    pub fn measure(q: usize, c: usize) -> GateOp {
        GateOp { kind: GateKind::Measure, qubits: alloc::vec![q], clbits: alloc::vec![c], params: Vec::new() }
    }

    pub fn is_symbolic(&self) -> bool {
        self.params.iter().any(|p| matches!(p, Param::Symbol { .. }))
    }

    /// Checks operand counts and angle finiteness.
    pub fn check_shape(&self) -> Result<(), String> {
        if let Some(n) = self.kind.qubit_arity() {
            if self.qubits.len() != n {
                return Err(alloc::format!("{} expects {} qubit(s), got {}", self.kind, n, self.qubits.len()));
            }
        } else if self.qubits.is_empty() {
            return Err(String::from("barrier needs at least one qubit"));
        }
        if self.params.len() != self.kind.param_count() {
            return Err(alloc::format!(
                "{} expects {} parameter(s), got {}",
                self.kind,
                self.kind.param_count(),
                self.params.len()
            ));
        }
        let expected_clbits = usize::from(self.kind == GateKind::Measure);
        if self.clbits.len() != expected_clbits {
            return Err(alloc::format!("{} has {} clbit operand(s)", self.kind, self.clbits.len()));
        }
        if self.kind.is_two_qubit() && self.qubits[0] == self.qubits[1] {
            return Err(alloc::format!("{} operands must be distinct", self.kind));
        }
        for p in &self.params {
            let finite = match p {
                Param::Literal(v) => v.is_finite(),
                Param::Symbol { scale, offset, .. } => scale.is_finite() && offset.is_finite(),
            };
            if !finite {
                return Err(alloc::format!("{} has a non-finite angle", self.kind));
            }
        }
        Ok(())
    }
}

/// A circuit over a flat qubit and clbit index space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Program {
    pub n_qubits: usize,
    pub n_clbits: usize,
    pub ops: Vec<GateOp>,
    /// Declared symbolic parameter names, in declaration order.
    pub parameters: Vec<String>,
}

impl Program {
    pub fn new(n_qubits: usize, n_clbits: usize) -> Program {
        Program { n_qubits, n_clbits, ops: Vec::new(), parameters: Vec::new() }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn is_parametric(&self) -> bool {
        self.ops.iter().any(GateOp::is_symbolic)
    }

    /// Verifies operand ranges, gate shapes and parameter declarations.
    pub fn check(&self) -> Result<(), String> {
        for (i, name) in self.parameters.iter().enumerate() {
            if self.parameters[..i].contains(name) {
                return Err(alloc::format!("parameter `{name}` declared twice"));
            }
        }
        for (i, op) in self.ops.iter().enumerate() {
            op.check_shape().map_err(|e| alloc::format!("op {i}: {e}"))?;
            if let Some(&q) = op.qubits.iter().find(|&&q| q >= self.n_qubits) {
                return Err(alloc::format!("op {i}: qubit {q} out of range ({} qubits)", self.n_qubits));
            }
            if let Some(&c) = op.clbits.iter().find(|&&c| c >= self.n_clbits) {
                return Err(alloc::format!("op {i}: clbit {c} out of range ({} clbits)", self.n_clbits));
            }
            for p in &op.params {
                if let Some(name) = p.symbol_name() {
                    if !self.parameters.iter().any(|d| d == name) {
                        return Err(alloc::format!("op {i}: undeclared parameter `{name}`"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Replaces every symbolic angle using `names[i] = values[i]`.
    pub fn bind(&self, names: &[String], values: &[f64]) -> Result<Program, String> {
        if names.len() != values.len() {
            return Err(alloc::format!("expected {} value(s), got {}", names.len(), values.len()));
        }
        let lookup = |n: &str| names.iter().position(|x| x == n).map(|i| values[i]);
        let mut out = self.clone();
        for op in &mut out.ops {
            for p in &mut op.params {
                if let Some(name) = p.symbol_name() {
                    let v = p.resolve(lookup).ok_or_else(|| alloc::format!("unbound parameter `{name}`"))?;
                    *p = Param::Literal(v);
                }
            }
        }
        out.parameters.clear();
        Ok(out)
    }
}
