//! User-facing runtime: submits circuits and artifacts through the gateway
//! and drives parametric loops.

use std::collections::BTreeMap;
use std::io;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use qmio_core::engine::OutputFormat;
use qmio_core::job::{ErrorReply, JobSpec, ResultReply};
use qmio_core::latency::{LatencyDistribution, LatencyRecord};
use qmio_core::qasm::{parse_qasm2, QasmError};
use qmio_core::transpile::CompiledArtifact;
use qmio_core::vqe::{minimize, Hamiltonian, OptimizerConfig};
use qmio_core::wire::{Envelope, MsgType};
use serde::{Deserialize, Serialize};

use crate::framing::{from_payload, to_payload, Connection, FrameError};
use crate::gateway::{compare_modes, fresh_job_id, GatewayConfig, Injection, IntegrationMode, ModeReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionKind {
    #[default]
    Batch,
    Interactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeConfig {
    pub gateway: SocketAddr,
    pub shots: u64,
    pub output_format: OutputFormat,
    pub session: SessionKind,
    /// Engine seed forwarded with every job.
    pub seed: Option<u64>,
    pub timeout: Option<Duration>,
}

impl RuntimeConfig {
    pub fn new(gateway: SocketAddr) -> RuntimeConfig {
        RuntimeConfig {
            gateway,
            shots: 1000,
            output_format: OutputFormat::Counts,
            session: SessionKind::Batch,
            seed: None,
            timeout: None,
        }
    }
}

/// Per-call overrides of the configured defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub shots: Option<u64>,
    pub repetition_period: Option<f64>,
    pub output_format: Option<OutputFormat>,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("shots must be at least 1")]
    NoShots,
    #[error(transparent)]
    Parse(#[from] QasmError),
    #[error("{0}")]
    Remote(ErrorReply),
    #[error("gateway unreachable: {0}")]
    Connect(io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("unexpected {0} reply")]
    Unexpected(MsgType),
    #[error("malformed reply: {0}")]
    Payload(#[from] serde_json::Error),
}

impl ClientError {
    /// Pipeline stage of a remote failure, if it names one.
    pub fn stage(&self) -> Option<&str> {
        match self {
            ClientError::Remote(e) => e.stage.as_deref(),
            ClientError::Parse(_) => Some("parse"),
            _ => None,
        }
    }
}

pub struct RuntimeClient {
    cfg: RuntimeConfig,
    conn: Option<Connection>,
    session_tag: String,
}

impl RuntimeClient {
    pub fn new(cfg: RuntimeConfig) -> Result<RuntimeClient, ClientError> {
        if cfg.shots == 0 {
            return Err(ClientError::NoShots);
        }
        let session_tag = format!("interactive-{}", fresh_job_id());
        Ok(RuntimeClient { cfg, conn: None, session_tag })
    }

    pub fn config(&self) -> &RuntimeConfig {
        &self.cfg
    }

    fn connection(&mut self) -> Result<&mut Connection, ClientError> {
        if self.conn.is_none() {
            let c = Connection::open(self.cfg.gateway, self.cfg.timeout).map_err(ClientError::Connect)?;
            self.conn = Some(c);
        }
        Ok(self.conn.as_mut().expect("just opened"))
    }

    fn prepare(&self, mut spec: JobSpec, o: Overrides) -> Result<JobSpec, ClientError> {
        spec.shots = o.shots.unwrap_or(self.cfg.shots);
        if spec.shots == 0 {
            return Err(ClientError::NoShots);
        }
        spec.repetition_period = o.repetition_period;
        spec.output_format = o.output_format.unwrap_or(self.cfg.output_format);
        spec.seed = self.cfg.seed;
        if self.cfg.session == SessionKind::Interactive {
            spec.session = Some(self.session_tag.clone());
        }
        Ok(spec)
    }

    pub fn submit(&mut self, spec: &JobSpec) -> Result<ResultReply, ClientError> {
        let env = Envelope::new(MsgType::Submit, fresh_job_id(), to_payload(spec));
        let reply = match self.connection()?.request(&env) {
            Ok(r) => r,
            Err(e) => {
                self.conn = None;
                return Err(e.into());
            }
        };
        match reply.msg_type {
            MsgType::Result => Ok(from_payload(&reply.payload)?),
            MsgType::Error => Err(ClientError::Remote(from_payload(&reply.payload)?)),
            other => Err(ClientError::Unexpected(other)),
        }
    }

    /// Parses locally first, so malformed source never reaches the network.
    pub fn run_circuit(&mut self, qasm: &str, o: Overrides) -> Result<ResultReply, ClientError> {
        parse_qasm2(qasm)?;
        let spec = self.prepare(JobSpec::qasm(qasm, 0), o)?;
        self.submit(&spec)
    }

    pub fn submit_artifact(
        &mut self,
        artifact: &CompiledArtifact,
        values: &[f64],
        o: Overrides,
    ) -> Result<ResultReply, ClientError> {
        let spec = self.prepare(JobSpec::artifact(artifact.to_text(), values.to_vec(), 0), o)?;
        self.submit(&spec)
    }

    pub fn ping(&mut self) -> Result<Duration, ClientError> {
        let t0 = Instant::now();
        let env = Envelope::new(MsgType::Ping, fresh_job_id(), "");
        match self.connection()?.request(&env)?.msg_type {
            MsgType::Pong => Ok(t0.elapsed()),
            other => Err(ClientError::Unexpected(other)),
        }
    }

    /// Minimizes the sampled expectation of `ham` over the artifact's
    /// parameters. Every evaluation is one bind plus one submission per
    /// measurement basis.
    pub fn run_vqe_toy(
        &mut self,
        artifact: &CompiledArtifact,
        ham: &Hamiltonian,
        shots: u64,
        opt: &OptimizerConfig,
    ) -> Result<OptimizationTrace, ClientError> {
        let x0 = vec![0.0; artifact.parameter_names.len()];
        let mut iterations = Vec::new();
        let mut submissions = 0;
        let o = Overrides { shots: Some(shots), ..Overrides::default() };
        let min = minimize(&x0, opt, |params| -> Result<f64, ClientError> {
            let t0 = Instant::now();
            let (value, latency) = if ham.measurement_bases() == 0 {
                (ham.identity_offset(), None)
            } else {
                let reply = self.submit_artifact(artifact, params, o)?;
                submissions += 1;
                (ham.expectation_from_counts(&reply.result.counts), reply.latency)
            };
            iterations.push(Iteration {
                parameters: params.to_vec(),
                value,
                wall_clock: t0.elapsed().as_secs_f64(),
                latency,
            });
            Ok(value)
        })?;
        Ok(OptimizationTrace {
            iterations,
            converged: min.converged,
            best_value: min.best_value,
            best_parameters: min.best_parameters,
            submissions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub parameters: Vec<f64>,
    pub value: f64,
    pub wall_clock: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<Iteration>,
    pub converged: bool,
    /// NaN when no evaluation ran.
    pub best_value: f64,
    pub best_parameters: Vec<f64>,
    /// Network submissions made.
    pub submissions: usize,
}

pub const BELL: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nh q[0];\ncx q[0],q[1];\nmeasure q[0] -> c[0];\nmeasure q[1] -> c[1];\n";

pub struct BenchmarkOptions {
    pub jobs: usize,
    pub shots: u64,
    pub latency: Arc<dyn LatencyDistribution>,
    pub injection: Injection,
    pub seed: u64,
}

/// Runs `jobs` Bell submissions through a mode-A and a mode-B gateway in
/// front of `broker` and writes `<stem>.json` and `<stem>.csv` to `out`.
pub fn benchmark_modes(
    broker: SocketAddr,
    opts: &BenchmarkOptions,
    out: &Path,
    stem: &str,
) -> io::Result<(ModeReport, PathBuf, PathBuf)> {
    let workload = vec![JobSpec::qasm(BELL, opts.shots); opts.jobs];
    let cfg = GatewayConfig {
        latency: opts.latency.clone(),
        injection: opts.injection,
        seed: opts.seed,
        ..GatewayConfig::new(broker, IntegrationMode::ResourceManager)
    };
    let report = compare_modes(&cfg, &workload);
    let (json, csv) = report.write(out, stem)?;
    Ok((report, json, csv))
}

/// Counts sorted by bitstring, for stable printing.
pub fn format_counts(counts: &BTreeMap<String, u64>) -> String {
    counts.iter().map(|(k, v)| format!("{k}: {v}")).collect::<Vec<_>>().join("\n")
}
