//! Ahead-of-time compiled artifacts and their text container.
//!
//! ```text
//! QMIO-ARTIFACT 1
//! model: qmio32
//! model-version: 3
//! parameters: theta
//! initial-layout: 0 1 2 ...
//! final-layout: 0 1 2 ...
//! checksum: sha256:<64 hex digits>
//! ---
//! OPENQASM 2.0;
//! ...
//! ```
//!
//! The checksum is SHA-256 over the container with the checksum line removed.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::route::RoutedProgram;
use super::schedule::{check_budget, schedule, schedule_ops, TimedProgram};
use super::{decompose_to_basis, route, TranspileError};
use crate::hardware::HardwareModel;
use crate::program::Program;
use crate::qasm::{emit_qasm2, parse_qasm2};

pub const ARTIFACT_MAGIC: &str = "QMIO-ARTIFACT 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledArtifact {
    /// Routed body; symbolic angles are kept.
    pub routed: RoutedProgram,
    pub parameter_names: Vec<String>,
    pub model_name: String,
    pub model_version: u64,
    /// `sha256:<hex>` over the canonical container.
    pub checksum: String,
}

/// What to do when an artifact was compiled against an older calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StalePolicy {
    #[default]
    Warn,
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundProgram {
    pub program: TimedProgram,
    /// Set when the model was recalibrated after compilation.
    pub stale: bool,
}

fn join(values: &[usize]) -> String {
    let parts: Vec<String> = values.iter().map(ToString::to_string).collect();
    parts.join(" ")
}

fn digest_hex(content: &str) -> String {
    let digest = Sha256::digest(content.as_bytes());
    let mut out = String::from("sha256:");
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

impl CompiledArtifact {
    fn header_and_body(&self) -> (String, String) {
        let header = format!(
            "{ARTIFACT_MAGIC}\nmodel: {}\nmodel-version: {}\nparameters: {}\ninitial-layout: {}\nfinal-layout: {}\n",
            self.model_name,
            self.model_version,
            self.parameter_names.join(" "),
            join(&self.routed.initial_layout),
            join(&self.routed.final_layout),
        );
        (header, emit_qasm2(&self.routed.base))
    }

    /// Content hash over the canonical container minus the checksum line.
    pub fn compute_checksum(&self) -> String {
        let (header, body) = self.header_and_body();
        digest_hex(&format!("{header}---\n{body}"))
    }

    pub fn verify_checksum(&self) -> bool {
        self.checksum == self.compute_checksum()
    }

    pub fn to_text(&self) -> String {
        let (header, body) = self.header_and_body();
        format!("{header}checksum: {}\n---\n{body}", self.checksum)
    }

    pub fn from_text(text: &str) -> Result<CompiledArtifact, TranspileError> {
        let bad = |m: &str| TranspileError::MalformedArtifact(m.to_string());
        let (head, body) = text.split_once("\n---\n").ok_or_else(|| bad("missing `---` separator"))?;
        let mut lines = head.lines();
        if lines.next() != Some(ARTIFACT_MAGIC) {
            return Err(bad("missing artifact header"));
        }
        let mut field = |key: &str| -> Result<String, TranspileError> {
            let line = lines.next().ok_or_else(|| bad(&format!("missing `{key}`")))?;
            let value = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .ok_or_else(|| bad(&format!("expected `{key}:`, found `{line}`")))?;
            Ok(value.trim().to_string())
        };
        let model_name = field("model")?;
        let model_version = field("model-version")?.parse::<u64>().map_err(|_| bad("bad model-version"))?;
        let parameter_names: Vec<String> = field("parameters")?.split_whitespace().map(ToString::to_string).collect();
        let layout = |s: String| -> Result<Vec<usize>, TranspileError> {
            s.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| bad("bad layout entry"))).collect()
        };
        let initial_layout = layout(field("initial-layout")?)?;
        let final_layout = layout(field("final-layout")?)?;
        let checksum = field("checksum")?;
        let base = parse_qasm2(body).map_err(|e| TranspileError::MalformedArtifact(format!("body: {e}")))?;
        if base.parameters != parameter_names {
            return Err(bad("parameter table disagrees with body"));
        }
        let n = base.n_qubits;
        for l in [&initial_layout, &final_layout] {
            let mut seen = alloc::vec![false; n];
            if l.len() != n || !l.iter().all(|&p| p < n && !core::mem::replace(&mut seen[p], true)) {
                return Err(bad("layout is not a permutation of the physical qubits"));
            }
        }
        let artifact = CompiledArtifact {
            routed: RoutedProgram { base, initial_layout, final_layout },
            parameter_names,
            model_name,
            model_version,
            checksum,
        };
        if !artifact.verify_checksum() {
            return Err(TranspileError::ChecksumMismatch);
        }
        Ok(artifact)
    }
}

/// Decomposes and routes `program` once, keeping symbolic parameters for
/// later binding. The duration budget is checked up front since durations
/// do not depend on angles.
pub fn compile_aot(program: &Program, model: &HardwareModel, seed: u64) -> Result<CompiledArtifact, TranspileError> {
    let lowered = decompose_to_basis(program, model)?;
    let routed = route(&lowered, model, seed)?;
    check_budget(&schedule_ops(&routed.base, model)?, model)?;
    let mut artifact = CompiledArtifact {
        routed,
        parameter_names: program.parameters.clone(),
        model_name: model.name.clone(),
        model_version: model.version,
        checksum: String::new(),
    };
    artifact.checksum = artifact.compute_checksum();
    Ok(artifact)
}

/// Substitutes `values` (in `parameter_names` order) and schedules the
/// result on `model`.
pub fn bind_parameters(
    artifact: &CompiledArtifact,
    values: &[f64],
    model: &HardwareModel,
    policy: StalePolicy,
) -> Result<BoundProgram, TranspileError> {
    if values.len() != artifact.parameter_names.len() {
        return Err(TranspileError::ArityMismatch { expected: artifact.parameter_names.len(), got: values.len() });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(TranspileError::NonFiniteValue(*v));
    }
    if artifact.model_name != model.name {
        return Err(TranspileError::ModelMismatch { artifact: artifact.model_name.clone(), model: model.name.clone() });
    }
    if model.version < artifact.model_version {
        return Err(TranspileError::FutureArtifact { artifact: artifact.model_version, model: model.version });
    }
    let stale = model.version > artifact.model_version;
    if stale && policy == StalePolicy::Reject {
        return Err(TranspileError::StaleArtifact { artifact: artifact.model_version, model: model.version });
    }
    let base = artifact.routed.base.bind(&artifact.parameter_names, values).map_err(TranspileError::Bind)?;
    let routed = RoutedProgram { base, ..artifact.routed.clone() };
    Ok(BoundProgram { program: schedule(&routed, model)?, stale })
}
