//! Payload documents carried inside envelopes.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{ExecutionResult, OutputFormat};
use crate::latency::LatencyRecord;
use crate::wire::JobId;

pub const IR_QASM2: &str = "qasm2";

/// SUBMIT payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub ir_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ir_text: Option<String>,
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_period: Option<f64>,
    #[serde(default)]
    pub output_format: OutputFormat,
    /// Artifact container text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aot_artifact: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_values: Option<Vec<f64>>,
    /// Overrides the broker's engine seed for this job.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Client session tag, used by the gateway for route bookkeeping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("unsupported ir_kind `{0}`")]
    UnsupportedIrKind(String),
    #[error("exactly one of ir_text and aot_artifact must be present")]
    SourceAmbiguous,
    #[error("shots must be at least 1")]
    NoShots,
    #[error("repetition_period must be positive and finite")]
    BadRepetitionPeriod,
    #[error("parameter_values given without an aot_artifact")]
    StrayParameters,
}

impl JobSpec {
    pub fn qasm(text: impl Into<String>, shots: u64) -> JobSpec {
        JobSpec {
            ir_kind: String::from(IR_QASM2),
            ir_text: Some(text.into()),
            shots,
            repetition_period: None,
            output_format: OutputFormat::Counts,
            aot_artifact: None,
            parameter_values: None,
            seed: None,
            session: None,
        }
    }

    pub fn artifact(container: impl Into<String>, values: Vec<f64>, shots: u64) -> JobSpec {
        JobSpec {
            ir_text: None,
            aot_artifact: Some(container.into()),
            parameter_values: Some(values),
            ..JobSpec::qasm("", shots)
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.ir_kind != IR_QASM2 {
            return Err(SpecError::UnsupportedIrKind(self.ir_kind.clone()));
        }
        if self.ir_text.is_some() == self.aot_artifact.is_some() {
            return Err(SpecError::SourceAmbiguous);
        }
        if self.shots == 0 {
            return Err(SpecError::NoShots);
        }
        if let Some(p) = self.repetition_period {
            if !(p.is_finite() && p > 0.0) {
                return Err(SpecError::BadRepetitionPeriod);
            }
        }
        if self.parameter_values.is_some() && self.aot_artifact.is_none() {
            return Err(SpecError::StrayParameters);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Compiling,
    Executing,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn name(self) -> &'static str {
        match self {
            JobState::Queued => "queued",
            JobState::Compiling => "compiling",
            JobState::Executing => "executing",
            JobState::Done => "done",
            JobState::Failed => "failed",
            JobState::Cancelled => "cancelled",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed | JobState::Cancelled)
    }

    /// Allowed lifecycle edges. Failure may happen at any live stage
    /// (timeouts included); cancellation only before execution starts.
    pub fn can_transition(self, to: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, to),
            (Queued, Compiling)
                | (Compiling, Executing)
                | (Executing, Done)
                | (Queued | Compiling | Executing, Failed)
                | (Queued | Compiling, Cancelled)
        )
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Broker-side time split for one job, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JobTiming {
    pub queue_wait: f64,
    pub compile: f64,
    pub execute: f64,
}

/// RESULT payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultReply {
    pub result: ExecutionResult,
    pub timing: JobTiming,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Filled in by the gateway.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyRecord>,
}

/// ERROR payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReply {
    /// One of the `code` constants in [`codes`].
    pub code: String,
    /// Pipeline stage, when the failure belongs to one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub message: String,
}

pub mod codes {
    pub const VALIDATION_FAILED: &str = "validation-failed";
    pub const QUEUE_FULL: &str = "queue-full";
    pub const TIMEOUT: &str = "timeout";
    pub const EXECUTION_FAILED: &str = "execution-failed";
    pub const CANCELLED: &str = "cancelled";
    pub const CALIBRATING: &str = "calibrating";
    pub const BAD_FRAME: &str = "bad-frame";
    pub const UNKNOWN_JOB: &str = "unknown-job";
    pub const UNSUPPORTED: &str = "unsupported-message";
    pub const UNAVAILABLE: &str = "broker-unreachable";
    pub const ALLOCATION: &str = "allocation-conflict";
    pub const TIME_LIMIT: &str = "time-limit-exceeded";
}

impl ErrorReply {
    pub fn new(code: &str, stage: Option<&str>, message: impl Into<String>) -> ErrorReply {
        ErrorReply { code: String::from(code), stage: stage.map(String::from), message: message.into() }
    }
}

impl fmt::Display for ErrorReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage {
            Some(s) => write!(f, "{} at stage {}: {}", self.code, s, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: JobState,
    /// Monotonic nanoseconds since broker start.
    pub t_ns: u64,
}

/// STATUS_REP payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReply {
    pub job_id: JobId,
    pub state: JobState,
    pub transitions: Vec<Transition>,
    /// Jobs ahead of this one in the queue, when queued.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    /// The QPU is currently in a calibration window.
    #[serde(default)]
    pub behind_calibration: bool,
    pub model_version: u64,
}
