//! The control-node broker: accepts envelopes over TCP, queues SUBMITs in
//! FIFO order and runs them one at a time through the toolchain and the
//! configured engine.

use std::collections::{HashMap, VecDeque};
use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use qmio_core::calib::{run_calibration, CalibrationJitter, CalibrationScope};
use qmio_core::engine::{execute, EngineConfig};
use qmio_core::hardware::{HardwareModel, NominalCalibration};
use qmio_core::job::{codes, ErrorReply, JobSpec, JobState, JobTiming, ResultReply, StatusReply, Transition};
use qmio_core::qasm::{parse_qasm2, validate_program};
use qmio_core::transpile::{bind_parameters, transpile, CompiledArtifact, StalePolicy, TimedProgram};
use qmio_core::wire::{Envelope, JobId, MsgType};

use crate::event_log::{Event, EventLog, EventRecord};
use crate::framing::{from_payload, read_envelope, to_payload, write_envelope, FrameError};

pub const DEFAULT_PORT: u16 = 5555;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPolicy {
    /// Accept and hold submissions until the window closes.
    Queue,
    /// Refuse submissions while the window is open.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationWindow {
    pub policy: WindowPolicy,
    /// Simulated seconds the QPU is unavailable.
    pub duration: f64,
    /// Real seconds per simulated second.
    pub time_scale: f64,
}

impl Default for CalibrationWindow {
    fn default() -> Self {
        CalibrationWindow { policy: WindowPolicy::Queue, duration: 7200.0, time_scale: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub listen: String,
    pub engine: EngineConfig,
    /// Jobs allowed to wait behind the executing one.
    pub max_queue_depth: usize,
    pub per_job_timeout: Duration,
    /// Only accept ahead-of-time compiled artifacts.
    pub reject_uncompiled: bool,
    pub stale_policy: StalePolicy,
    /// Routing seed for in-broker compilation.
    pub compile_seed: u64,
    /// Real seconds slept per second of estimated QPU wall time; 0 disables.
    pub wall_time_scale: f64,
    pub calibration: CalibrationWindow,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            listen: format!("127.0.0.1:{DEFAULT_PORT}"),
            engine: EngineConfig::statevector(0),
            max_queue_depth: 16,
            per_job_timeout: Duration::from_secs(120),
            reject_uncompiled: false,
            stale_policy: StalePolicy::Warn,
            compile_seed: 0,
            wall_time_scale: 0.0,
            calibration: CalibrationWindow::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BrokerError {
    #[error("invalid broker configuration: {0}")]
    Config(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl BrokerConfig {
    pub fn validate(&self) -> Result<(), BrokerError> {
        if self.max_queue_depth < 1 {
            return Err(BrokerError::Config("max_queue_depth must be at least 1".into()));
        }
        if self.per_job_timeout.is_zero() {
            return Err(BrokerError::Config("per_job_timeout must be positive".into()));
        }
        if !(self.wall_time_scale >= 0.0 && self.wall_time_scale.is_finite()) {
            return Err(BrokerError::Config("wall_time_scale must be a non-negative number".into()));
        }
        let w = &self.calibration;
        if !(w.duration > 0.0 && w.time_scale >= 0.0 && w.time_scale.is_finite()) {
            return Err(BrokerError::Config("calibration window must have positive duration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobRecord {
    pub job_id: JobId,
    pub state: JobState,
    pub transitions: Vec<Transition>,
    pub result: Option<ResultReply>,
    pub error: Option<ErrorReply>,
    cancel_requested: bool,
}

struct QueuedJob {
    id: JobId,
    spec: JobSpec,
    enqueued: Instant,
    reply: mpsc::Sender<Envelope>,
}

struct PendingCalibration {
    until: Instant,
    model: HardwareModel,
}

#[derive(Default)]
struct Queue {
    jobs: VecDeque<QueuedJob>,
    calibration: Option<PendingCalibration>,
    shutdown: bool,
}

struct Shared {
    cfg: BrokerConfig,
    model: RwLock<Arc<HardwareModel>>,
    queue: Mutex<Queue>,
    wake: Condvar,
    records: Mutex<HashMap<JobId, JobRecord>>,
    log: EventLog,
    stopping: AtomicBool,
}

impl Shared {
    fn model(&self) -> Arc<HardwareModel> {
        self.model.read().unwrap().clone()
    }

    fn swap_model(&self, model: HardwareModel) {
        let version = model.version;
        *self.model.write().unwrap() = Arc::new(model);
        self.log.record(Event::ModelSwap { version });
    }

    fn transition(&self, id: JobId, to: JobState) {
        let mut records = self.records.lock().unwrap();
        let rec = records.get_mut(&id).expect("known job");
        debug_assert!(rec.state.can_transition(to), "{} -> {}", rec.state, to);
        let from = rec.state;
        let t_ns = self.log.record(Event::Transition { job_id: id, from: Some(from), to });
        rec.state = to;
        rec.transitions.push(Transition { state: to, t_ns });
    }

    fn fail(&self, id: JobId, err: ErrorReply) -> Envelope {
        self.transition(id, JobState::Failed);
        let env = error_envelope(id, &err);
        self.records.lock().unwrap().get_mut(&id).expect("known job").error = Some(err);
        env
    }
}

fn error_envelope(id: JobId, err: &ErrorReply) -> Envelope {
    Envelope::new(MsgType::Error, id, to_payload(err))
}

fn validation(stage: &str, msg: impl ToString) -> ErrorReply {
    ErrorReply::new(codes::VALIDATION_FAILED, Some(stage), msg.to_string())
}

/// Running broker. Dropping it stops the accept loop and the executor.
pub struct Broker {
    shared: Arc<Shared>,
    addr: SocketAddr,
    accept: Option<JoinHandle<()>>,
    executor: Option<JoinHandle<()>>,
}

impl Broker {
    pub fn start(cfg: BrokerConfig, model: HardwareModel) -> Result<Broker, BrokerError> {
        Broker::start_with_log(cfg, model, None)
    }

    /// Like [`Broker::start`], also writing the event log to `sink`.
    pub fn start_with_log(
        cfg: BrokerConfig,
        model: HardwareModel,
        sink: Option<Box<dyn io::Write + Send>>,
    ) -> Result<Broker, BrokerError> {
        cfg.validate()?;
        let listener =
            TcpListener::bind(&cfg.listen).map_err(|source| BrokerError::Bind { addr: cfg.listen.clone(), source })?;
        let addr = listener.local_addr()?;
        let epoch = Instant::now();
        let log = match sink {
            Some(s) => EventLog::with_sink(epoch, s),
            None => EventLog::new(epoch),
        };
        let shared = Arc::new(Shared {
            cfg,
            model: RwLock::new(Arc::new(model)),
            queue: Mutex::new(Queue::default()),
            wake: Condvar::new(),
            records: Mutex::new(HashMap::new()),
            log,
            stopping: AtomicBool::new(false),
        });
        let executor = {
            let shared = shared.clone();
            thread::Builder::new().name("qcn-executor".into()).spawn(move || executor_loop(&shared))?
        };
        let accept = {
            let shared = shared.clone();
            thread::Builder::new().name("qcn-accept".into()).spawn(move || accept_loop(listener, shared))?
        };
        log::info!("broker listening on {addr}");
        Ok(Broker { shared, addr, accept: Some(accept), executor: Some(executor) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.shared.cfg
    }

    pub fn model(&self) -> Arc<HardwareModel> {
        self.shared.model()
    }

    /// Atomically replaces the active model. Jobs already past compilation
    /// finish against the model they were compiled for.
    pub fn swap_model(&self, model: HardwareModel) {
        self.shared.swap_model(model);
    }

    /// Opens a calibration window now. The recalibrated model becomes
    /// active when the window closes; until then queued jobs wait (or new
    /// submissions are refused, per policy). Returns the new version.
    pub fn begin_calibration(&self, scope: CalibrationScope, seed: u64, now_unix: i64) -> u64 {
        let current = self.shared.model();
        let window = self.shared.cfg.calibration;
        let end_unix = now_unix + window.duration.round() as i64;
        let (next, _) = run_calibration(
            &current,
            scope,
            seed,
            end_unix,
            &NominalCalibration::default(),
            &CalibrationJitter::default(),
        );
        let version = next.version;
        let until = Instant::now() + Duration::from_secs_f64(window.duration * window.time_scale);
        let mut q = self.shared.queue.lock().unwrap();
        self.shared.log.record(Event::CalibrationStart {
            scope,
            until_ns: self.shared.log.ns_since_epoch(until),
            version,
        });
        q.calibration = Some(PendingCalibration { until, model: next });
        self.shared.wake.notify_all();
        version
    }

    pub fn is_calibrating(&self) -> bool {
        self.shared.queue.lock().unwrap().calibration.is_some()
    }

    pub fn queue_len(&self) -> usize {
        self.shared.queue.lock().unwrap().jobs.len()
    }

    pub fn record(&self, id: JobId) -> Option<JobRecord> {
        self.shared.records.lock().unwrap().get(&id).cloned()
    }

    pub fn records(&self) -> Vec<JobRecord> {
        let mut v: Vec<JobRecord> = self.shared.records.lock().unwrap().values().cloned().collect();
        v.sort_by_key(|r| r.transitions.first().map(|t| t.t_ns));
        v
    }

    pub fn events(&self) -> Vec<EventRecord> {
        self.shared.log.records()
    }

    /// Nanoseconds since start, on the event log's clock.
    pub fn now_ns(&self) -> u64 {
        self.shared.log.ns_since_epoch(Instant::now())
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if self.shared.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        {
            let mut q = self.shared.queue.lock().unwrap();
            q.shutdown = true;
            self.shared.wake.notify_all();
        }
        // unblock accept()
        let _ = TcpStream::connect(self.addr);
        for h in [self.accept.take(), self.executor.take()].into_iter().flatten() {
            let _ = h.join();
        }
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for stream in listener.incoming() {
        if shared.stopping.load(Ordering::SeqCst) {
            break;
        }
        match stream {
            Ok(s) => {
                let shared = shared.clone();
                let _ = thread::Builder::new().name("qcn-conn".into()).spawn(move || {
                    if let Err(e) = handle_connection(s, &shared) {
                        log::debug!("connection closed: {e}");
                    }
                });
            }
            Err(e) => log::warn!("accept failed: {e}"),
        }
    }
}

fn handle_connection(mut stream: TcpStream, shared: &Shared) -> Result<(), FrameError> {
    stream.set_nodelay(true)?;
    loop {
        let env = match read_envelope(&mut stream) {
            Ok(Some(e)) => e,
            Ok(None) => return Ok(()),
            Err(FrameError::Wire(e)) => {
                let err = ErrorReply::new(codes::BAD_FRAME, None, e.to_string());
                let _ = write_envelope(&mut stream, &error_envelope(JobId::default(), &err));
                return Err(FrameError::Wire(e));
            }
            Err(e) => return Err(e),
        };
        let reply = match env.msg_type {
            MsgType::Ping => Envelope::new(MsgType::Pong, env.job_id, ""),
            MsgType::Submit => submit(shared, env),
            MsgType::StatusReq => status(shared, env.job_id),
            MsgType::Cancel => cancel(shared, env.job_id),
            other => {
                let err = ErrorReply::new(codes::UNSUPPORTED, None, format!("{other} is not a request"));
                error_envelope(env.job_id, &err)
            }
        };
        write_envelope(&mut stream, &reply)?;
    }
}

fn submit(shared: &Shared, env: Envelope) -> Envelope {
    let id = env.job_id;
    let spec: JobSpec = match from_payload(&env.payload) {
        Ok(s) => s,
        Err(e) => return error_envelope(id, &validation("decode", e)),
    };
    if let Err(e) = spec.validate() {
        return error_envelope(id, &validation("validate", e));
    }
    if shared.cfg.reject_uncompiled && spec.aot_artifact.is_none() {
        return error_envelope(id, &validation("validate", "broker accepts only ahead-of-time compiled artifacts"));
    }
    let (tx, rx) = mpsc::channel();
    {
        let mut q = shared.queue.lock().unwrap();
        if q.shutdown {
            return error_envelope(id, &ErrorReply::new(codes::UNAVAILABLE, None, "broker is shutting down"));
        }
        if q.calibration.is_some() && shared.cfg.calibration.policy == WindowPolicy::Reject {
            return error_envelope(id, &ErrorReply::new(codes::CALIBRATING, None, "QPU is calibrating"));
        }
        if q.jobs.len() >= shared.cfg.max_queue_depth {
            return error_envelope(
                id,
                &ErrorReply::new(codes::QUEUE_FULL, None, format!("{} job(s) already waiting", q.jobs.len())),
            );
        }
        let mut records = shared.records.lock().unwrap();
        if records.contains_key(&id) {
            return error_envelope(id, &validation("validate", format!("duplicate job id {id}")));
        }
        let t_ns = shared.log.record(Event::Transition { job_id: id, from: None, to: JobState::Queued });
        records.insert(
            id,
            JobRecord {
                job_id: id,
                state: JobState::Queued,
                transitions: vec![Transition { state: JobState::Queued, t_ns }],
                result: None,
                error: None,
                cancel_requested: false,
            },
        );
        q.jobs.push_back(QueuedJob { id, spec, enqueued: Instant::now(), reply: tx });
        shared.wake.notify_all();
    }
    rx.recv().unwrap_or_else(|_| {
        error_envelope(id, &ErrorReply::new(codes::UNAVAILABLE, None, "broker stopped before the job ran"))
    })
}

fn status(shared: &Shared, id: JobId) -> Envelope {
    let q = shared.queue.lock().unwrap();
    let records = shared.records.lock().unwrap();
    let Some(rec) = records.get(&id) else {
        return error_envelope(id, &ErrorReply::new(codes::UNKNOWN_JOB, None, format!("no job {id}")));
    };
    let reply = StatusReply {
        job_id: id,
        state: rec.state,
        transitions: rec.transitions.clone(),
        position: q.jobs.iter().position(|j| j.id == id),
        behind_calibration: q.calibration.is_some(),
        model_version: shared.model().version,
    };
    Envelope::new(MsgType::StatusRep, id, to_payload(&reply))
}

fn cancel(shared: &Shared, id: JobId) -> Envelope {
    let mut q = shared.queue.lock().unwrap();
    let state = shared.records.lock().unwrap().get(&id).map(|r| r.state);
    match state {
        None => error_envelope(id, &ErrorReply::new(codes::UNKNOWN_JOB, None, format!("no job {id}"))),
        Some(JobState::Queued) => {
            if let Some(pos) = q.jobs.iter().position(|j| j.id == id) {
                let job = q.jobs.remove(pos).expect("position is valid");
                drop(q);
                shared.transition(id, JobState::Cancelled);
                let err = ErrorReply::new(codes::CANCELLED, None, "cancelled while queued");
                let _ = job.reply.send(error_envelope(id, &err));
                shared.records.lock().unwrap().get_mut(&id).expect("known job").error = Some(err);
            } else {
                drop(q);
            }
            status(shared, id)
        }
        Some(JobState::Compiling) => {
            shared.records.lock().unwrap().get_mut(&id).expect("known job").cancel_requested = true;
            drop(q);
            status(shared, id)
        }
        Some(s) => error_envelope(
            id,
            &ErrorReply::new(codes::VALIDATION_FAILED, Some("cancel"), format!("cannot cancel a job in state {s}")),
        ),
    }
}

fn executor_loop(shared: &Shared) {
    loop {
        let job = {
            let mut q = shared.queue.lock().unwrap();
            loop {
                if q.shutdown {
                    for job in q.jobs.drain(..) {
                        let err = ErrorReply::new(codes::UNAVAILABLE, None, "broker shut down");
                        let _ = job.reply.send(error_envelope(job.id, &err));
                    }
                    return;
                }
                if let Some(until) = q.calibration.as_ref().map(|c| c.until) {
                    let now = Instant::now();
                    if now < until {
                        q = shared.wake.wait_timeout(q, until - now).unwrap().0;
                        continue;
                    }
                    let done = q.calibration.take().expect("checked above");
                    shared.swap_model(done.model);
                }
                if let Some(job) = q.jobs.pop_front() {
                    break job;
                }
                q = shared.wake.wait(q).unwrap();
            }
        };
        let reply = run_job(shared, &job);
        let _ = job.reply.send(reply);
    }
}

fn compile(
    spec: &JobSpec,
    model: &HardwareModel,
    cfg: &BrokerConfig,
) -> Result<(TimedProgram, Vec<String>), ErrorReply> {
    if let Some(text) = &spec.aot_artifact {
        let artifact = CompiledArtifact::from_text(text).map_err(|e| validation(e.stage(), e))?;
        let values = spec.parameter_values.clone().unwrap_or_default();
        let bound =
            bind_parameters(&artifact, &values, model, cfg.stale_policy).map_err(|e| validation(e.stage(), e))?;
        let mut warnings = Vec::new();
        if bound.stale {
            warnings.push(format!(
                "artifact compiled at model version {} but the model is now at version {}",
                artifact.model_version, model.version
            ));
        }
        return Ok((bound.program, warnings));
    }
    let text = spec.ir_text.as_deref().unwrap_or_default();
    let program = parse_qasm2(text).map_err(|e| validation("parse", e))?;
    let program = validate_program(program, model).map_err(|e| validation("validate", e))?;
    let (_, timed) = transpile(&program, model, cfg.compile_seed).map_err(|e| validation(e.stage(), e))?;
    Ok((timed, Vec::new()))
}

fn run_job(shared: &Shared, job: &QueuedJob) -> Envelope {
    let cfg = &shared.cfg;
    let id = job.id;
    let started = Instant::now();
    let deadline = started + cfg.per_job_timeout;
    let queue_wait = started.duration_since(job.enqueued).as_secs_f64();
    shared.transition(id, JobState::Compiling);

    let model = shared.model();
    let compiled = compile(&job.spec, &model, cfg);
    let compile_time = started.elapsed().as_secs_f64();
    let (program, warnings) = match compiled {
        Ok(c) => c,
        Err(err) => return shared.fail(id, err),
    };
    if shared.records.lock().unwrap().get(&id).is_some_and(|r| r.cancel_requested) {
        shared.transition(id, JobState::Cancelled);
        let err = ErrorReply::new(codes::CANCELLED, None, "cancelled during compilation");
        return error_envelope(id, &err);
    }
    if Instant::now() >= deadline {
        return shared.fail(id, ErrorReply::new(codes::TIMEOUT, Some("compile"), "per-job timeout exceeded"));
    }

    shared.transition(id, JobState::Executing);
    let exec_start = Instant::now();
    let engine = cfg.engine.with_seed(job.spec.seed.unwrap_or(cfg.engine.rng_seed));
    let result = match execute(&engine, &program, job.spec.shots, job.spec.repetition_period, job.spec.output_format) {
        Ok(r) => r,
        Err(e) => return shared.fail(id, ErrorReply::new(codes::EXECUTION_FAILED, Some("execute"), e.to_string())),
    };
    // hold the QPU for the (scaled) estimated wall time
    if cfg.wall_time_scale > 0.0 {
        let occupancy = Duration::from_secs_f64(result.estimated_wall_time * cfg.wall_time_scale);
        let end = exec_start + occupancy;
        if end > deadline {
            thread::sleep(deadline.saturating_duration_since(Instant::now()));
            return shared
                .fail(id, ErrorReply::new(codes::TIMEOUT, Some("execute"), "per-job timeout exceeded; QPU released"));
        }
        thread::sleep(end.saturating_duration_since(Instant::now()));
    }
    let reply = ResultReply {
        result,
        timing: JobTiming { queue_wait, compile: compile_time, execute: exec_start.elapsed().as_secs_f64() },
        warnings,
        latency: None,
    };
    shared.transition(id, JobState::Done);
    let env = Envelope::new(MsgType::Result, id, to_payload(&reply));
    shared.records.lock().unwrap().get_mut(&id).expect("known job").result = Some(reply);
    env
}
