//! Lowering from logical programs to timed hardware programs:
//! basis decomposition, greedy swap routing, ASAP scheduling, and
//! ahead-of-time compilation with deferred parameter binding.

mod artifact;
pub mod decompose;
mod route;
mod schedule;

use alloc::string::String;
use alloc::vec::Vec;

pub use artifact::{bind_parameters, compile_aot, BoundProgram, CompiledArtifact, StalePolicy, ARTIFACT_MAGIC};
pub use decompose::{decompose_to_basis, lowerable};
pub use route::{is_coupling_valid, route, RoutedProgram};
pub use schedule::{op_duration, schedule, TimedInstruction, TimedProgram};

use crate::hardware::HardwareModel;
use crate::program::{GateKind, Program};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TranspileError {
    #[error("no decomposition of `{0}` into the model basis")]
    NoDecomposition(GateKind),
    #[error("`{0}` is not a basis gate; decompose before routing")]
    NotInBasis(GateKind),
    #[error("program needs {needed} qubits but the model has {available}")]
    TooManyQubits { needed: usize, available: usize },
    #[error("qubits {a} and {b} are not connected")]
    Unroutable { a: usize, b: usize },
    #[error("({a}, {b}) is not a coupling edge")]
    NotAnEdge { a: usize, b: usize },
    #[error("program duration {total:e} s exceeds the {max:e} s budget")]
    DurationBudgetExceeded { total: f64, max: f64 },
    #[error("unbound parameters {0:?}")]
    UnboundParameters(Vec<String>),
    #[error("expected {expected} parameter value(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("non-finite parameter value {0}")]
    NonFiniteValue(f64),
    #[error("binding failed: {0}")]
    Bind(String),
    #[error("artifact compiled for model `{artifact}`, not `{model}`")]
    ModelMismatch { artifact: String, model: String },
    #[error("artifact compiled at calibration version {artifact} but the model is at {model}")]
    StaleArtifact { artifact: u64, model: u64 },
    #[error("artifact version {artifact} is newer than model version {model}")]
    FutureArtifact { artifact: u64, model: u64 },
    #[error("malformed artifact: {0}")]
    MalformedArtifact(String),
    #[error("artifact checksum mismatch")]
    ChecksumMismatch,
}

impl TranspileError {
    /// Pipeline stage that produced the error.
    pub fn stage(&self) -> &'static str {
        match self {
            TranspileError::NoDecomposition(_) => "decompose",
            TranspileError::NotInBasis(_)
            | TranspileError::TooManyQubits { .. }
            | TranspileError::Unroutable { .. } => "route",
            TranspileError::NotAnEdge { .. }
            | TranspileError::DurationBudgetExceeded { .. }
            | TranspileError::UnboundParameters(_) => "schedule",
            TranspileError::ArityMismatch { .. }
            | TranspileError::NonFiniteValue(_)
            | TranspileError::Bind(_)
            | TranspileError::ModelMismatch { .. }
            | TranspileError::StaleArtifact { .. }
            | TranspileError::FutureArtifact { .. } => "bind",
            TranspileError::MalformedArtifact(_) | TranspileError::ChecksumMismatch => "load",
        }
    }
}

/// Just-in-time path: decompose, route and schedule a fully bound program.
pub fn transpile(
    program: &Program,
    model: &HardwareModel,
    seed: u64,
) -> Result<(RoutedProgram, TimedProgram), TranspileError> {
    let lowered = decompose_to_basis(program, model)?;
    let routed = route(&lowered, model, seed)?;
    let timed = schedule(&routed, model)?;
    Ok((routed, timed))
}
