//! The HPC-side gateway. Forwards SUBMITs to the broker over a single route,
//! either the way a resource manager would dispatch to a scheduled node
//! (mode A: injected dispatch delay, fresh connection per job) or over a
//! persistent message-bus connection (mode B).
//!
//! Batch submissions hold the route for their whole allocation. Interactive
//! sessions keep one broker connection open and borrow the route per
//! request, queueing FIFO behind whoever holds it.

use std::fmt;
use std::io::{self, ErrorKind};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use qmio_core::job::{codes, ErrorReply, JobSpec, ResultReply};
use qmio_core::latency::{LatencyDistribution, LatencyRecord, Summary, UniformLatency};
use qmio_core::wire::{Envelope, JobId, MsgType};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::framing::{from_payload, read_envelope, to_payload, write_envelope, Connection, FrameError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntegrationMode {
    /// Control node scheduled as an HPC node by the resource manager.
    #[serde(rename = "A")]
    ResourceManager,
    /// Gateway forwarding over a persistent message-bus connection.
    #[serde(rename = "B")]
    MessageBus,
}

impl IntegrationMode {
    pub fn label(self) -> &'static str {
        match self {
            IntegrationMode::ResourceManager => "A",
            IntegrationMode::MessageBus => "B",
        }
    }
}

impl fmt::Display for IntegrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for IntegrationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" | "resource_manager" => Ok(IntegrationMode::ResourceManager),
            "B" | "b" | "message_bus" => Ok(IntegrationMode::MessageBus),
            _ => Err(format!("unknown integration mode `{s}` (expected A or B)")),
        }
    }
}

/// How mode-A dispatch delay is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Injection {
    /// Really sleep before forwarding.
    #[default]
    Sleep,
    /// Add the drawn delay to the recorded total without sleeping.
    Virtual,
}

#[derive(Clone)]
pub struct GatewayConfig {
    pub broker: SocketAddr,
    pub mode: IntegrationMode,
    pub latency: Arc<dyn LatencyDistribution>,
    pub injection: Injection,
    pub seed: u64,
    pub batch_time_limit: Duration,
    pub interactive_time_limit: Duration,
}

impl GatewayConfig {
    pub fn new(broker: SocketAddr, mode: IntegrationMode) -> GatewayConfig {
        GatewayConfig {
            broker,
            mode,
            latency: Arc::new(UniformLatency::default()),
            injection: Injection::Sleep,
            seed: 0,
            batch_time_limit: Duration::from_secs(7200),
            interactive_time_limit: Duration::from_secs(300),
        }
    }
}

impl fmt::Debug for GatewayConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GatewayConfig")
            .field("broker", &self.broker)
            .field("mode", &self.mode)
            .field("latency", &self.latency.bounds())
            .field("injection", &self.injection)
            .field("seed", &self.seed)
            .finish()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("{0}")]
    Broker(ErrorReply),
    #[error("broker unreachable: {0}")]
    Unreachable(io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("allocation {0} exceeded its time limit")]
    TimeLimit(u64),
    #[error("allocation {0} is closed")]
    Closed(u64),
    #[error("unexpected {0} reply from broker")]
    UnexpectedReply(MsgType),
}

impl GatewayError {
    /// The ERROR payload a client of the gateway sees for this failure.
    pub fn to_reply(&self) -> ErrorReply {
        match self {
            GatewayError::Broker(e) => e.clone(),
            GatewayError::Unreachable(e) => ErrorReply::new(codes::UNAVAILABLE, None, e.to_string()),
            GatewayError::TimeLimit(_) => ErrorReply::new(codes::TIME_LIMIT, None, self.to_string()),
            GatewayError::Closed(_) => ErrorReply::new(codes::ALLOCATION, None, self.to_string()),
            other => ErrorReply::new(codes::UNAVAILABLE, None, other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationKind {
    Batch,
    Interactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub id: u64,
    pub kind: AllocationKind,
    pub time_limit: Duration,
    pub exclusive: bool,
    pub start: Instant,
    pub end: Option<Instant>,
}

impl Allocation {
    fn remaining(&self) -> Duration {
        self.time_limit.saturating_sub(self.start.elapsed())
    }
}

/// FIFO mutual exclusion over the broker route.
#[derive(Default)]
struct RouteLock {
    state: Mutex<(u64, u64)>,
    turn: Condvar,
}

struct RouteGuard<'a>(&'a RouteLock);

impl RouteLock {
    fn acquire(&self) -> RouteGuard<'_> {
        let mut s = self.state.lock().unwrap();
        let ticket = s.0;
        s.0 += 1;
        while s.1 != ticket {
            s = self.turn.wait(s).unwrap();
        }
        RouteGuard(self)
    }

    fn held(&self) -> bool {
        let s = self.state.lock().unwrap();
        s.0 != s.1
    }
}

impl Drop for RouteGuard<'_> {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().unwrap();
        s.1 += 1;
        self.0.turn.notify_all();
    }
}

pub struct Gateway {
    cfg: GatewayConfig,
    route: RouteLock,
    rng: Mutex<ChaCha8Rng>,
    bus: Mutex<Option<Connection>>,
    connections: AtomicUsize,
    log: Mutex<Vec<LatencyRecord>>,
    next_allocation: AtomicU64,
}

impl Gateway {
    pub fn new(cfg: GatewayConfig) -> Gateway {
        Gateway {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(cfg.seed)),
            cfg,
            route: RouteLock::default(),
            bus: Mutex::new(None),
            connections: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
            next_allocation: AtomicU64::new(1),
        }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    pub fn mode(&self) -> IntegrationMode {
        self.cfg.mode
    }

    /// Broker connections established so far.
    pub fn connections_opened(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }

    pub fn latency_log(&self) -> Vec<LatencyRecord> {
        self.log.lock().unwrap().clone()
    }

    /// True while some allocation holds or waits for the route.
    pub fn route_busy(&self) -> bool {
        self.route.held()
    }

    fn connect(&self) -> Result<Connection, GatewayError> {
        let c = Connection::open(self.cfg.broker, None).map_err(GatewayError::Unreachable)?;
        self.connections.fetch_add(1, Ordering::SeqCst);
        Ok(c)
    }

    fn allocation(&self, kind: AllocationKind) -> Allocation {
        let (time_limit, exclusive) = match kind {
            AllocationKind::Batch => (self.cfg.batch_time_limit, true),
            AllocationKind::Interactive => (self.cfg.interactive_time_limit, false),
        };
        Allocation {
            id: self.next_allocation.fetch_add(1, Ordering::SeqCst),
            kind,
            time_limit,
            exclusive,
            start: Instant::now(),
            end: None,
        }
    }

    fn draw_latency(&self) -> f64 {
        match self.cfg.mode {
            IntegrationMode::ResourceManager => {
                let mut rng = self.rng.lock().unwrap();
                self.cfg.latency.sample(&mut *rng as &mut dyn RngCore)
            }
            IntegrationMode::MessageBus => 0.0,
        }
    }

    fn inject(&self, injected: f64) {
        if injected > 0.0 && self.cfg.injection == Injection::Sleep {
            thread::sleep(Duration::from_secs_f64(injected));
        }
    }

    /// Best-effort CANCEL on a side connection after a time-limit breach.
    fn cancel_in_flight(&self, id: JobId) {
        if let Ok(mut c) = Connection::open(self.cfg.broker, Some(Duration::from_secs(5))) {
            let _ = c.request(&Envelope::new(MsgType::Cancel, id, ""));
        }
    }

    fn exchange(&self, conn: &mut Connection, env: &Envelope, alloc: &Allocation) -> Result<Envelope, GatewayError> {
        let remaining = alloc.remaining();
        if remaining.is_zero() {
            return Err(GatewayError::TimeLimit(alloc.id));
        }
        conn.set_read_timeout(Some(remaining)).map_err(FrameError::from)?;
        match conn.request(env) {
            Ok(reply) => Ok(reply),
            Err(FrameError::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                self.cancel_in_flight(env.job_id);
                Err(GatewayError::TimeLimit(alloc.id))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Builds and stores the latency record, and unpacks the reply.
    fn account(
        &self,
        reply: Envelope,
        id: JobId,
        t0: Instant,
        route_wait: f64,
        injected: f64,
    ) -> Result<ResultReply, GatewayError> {
        let mut total = t0.elapsed().as_secs_f64();
        if self.cfg.injection == Injection::Virtual {
            total += injected;
        }
        let mut record = LatencyRecord {
            mode: self.cfg.mode.label().to_string(),
            job_id: id,
            queue_wait: route_wait,
            injected,
            transport: 0.0,
            compile: 0.0,
            execute: 0.0,
            total,
        };
        let outcome = match reply.msg_type {
            MsgType::Result => {
                let mut r: ResultReply = from_payload(&reply.payload)
                    .map_err(|e| GatewayError::Broker(ErrorReply::new(codes::BAD_FRAME, None, e.to_string())))?;
                record.queue_wait += r.timing.queue_wait;
                record.compile = r.timing.compile;
                record.execute = r.timing.execute;
                record.transport = total - record.queue_wait - injected - record.compile - record.execute;
                r.latency = Some(record.clone());
                Ok(r)
            }
            MsgType::Error => {
                record.transport = total - route_wait - injected;
                let e: ErrorReply = from_payload(&reply.payload).unwrap_or_else(|e| {
                    ErrorReply::new(codes::BAD_FRAME, None, format!("undecodable error payload: {e}"))
                });
                Err(GatewayError::Broker(e))
            }
            other => return Err(GatewayError::UnexpectedReply(other)),
        };
        self.log.lock().unwrap().push(record);
        outcome
    }

    /// One exclusive batch allocation carrying one job.
    pub fn submit_batch(&self, id: JobId, spec: &JobSpec) -> Result<ResultReply, GatewayError> {
        self.submit_batch_raw(id, to_payload(spec))
    }

    /// As [`Gateway::submit_batch`], forwarding an already-encoded payload.
    pub fn submit_batch_raw(&self, id: JobId, payload: String) -> Result<ResultReply, GatewayError> {
        let t0 = Instant::now();
        let _route = self.route.acquire();
        let route_wait = t0.elapsed().as_secs_f64();
        let alloc = self.allocation(AllocationKind::Batch);
        let injected = self.draw_latency();
        self.inject(injected);
        let env = Envelope::new(MsgType::Submit, id, payload);
        let reply = match self.cfg.mode {
            IntegrationMode::ResourceManager => {
                let mut conn = self.connect()?;
                self.exchange(&mut conn, &env, &alloc)
            }
            IntegrationMode::MessageBus => {
                let mut bus = self.bus.lock().unwrap();
                if bus.is_none() {
                    *bus = Some(self.connect()?);
                }
                let r = self.exchange(bus.as_mut().expect("just opened"), &env, &alloc);
                if r.is_err() {
                    // the stream may hold a late reply; start clean next time
                    *bus = None;
                }
                r
            }
        }?;
        self.account(reply, id, t0, route_wait, injected)
    }

    pub fn open_interactive(self: &Arc<Self>) -> Session {
        Session { gateway: self.clone(), alloc: self.allocation(AllocationKind::Interactive), conn: None }
    }

    /// STATUS_REQ and CANCEL go on a side connection; they carry no SUBMIT
    /// traffic and so do not need the route.
    pub fn passthrough(&self, env: &Envelope) -> Result<Envelope, GatewayError> {
        let mut c =
            Connection::open(self.cfg.broker, Some(Duration::from_secs(30))).map_err(GatewayError::Unreachable)?;
        Ok(c.request(env)?)
    }
}

/// Short shared allocation; its broker connection is opened on the first
/// request and reused until the session ends.
pub struct Session {
    gateway: Arc<Gateway>,
    alloc: Allocation,
    conn: Option<Connection>,
}

impl Session {
    pub fn allocation(&self) -> &Allocation {
        &self.alloc
    }

    pub fn is_open(&self) -> bool {
        self.alloc.end.is_none()
    }

    pub fn close(&mut self) {
        self.conn = None;
        self.alloc.end.get_or_insert_with(Instant::now);
    }

    pub fn submit(&mut self, id: JobId, spec: &JobSpec) -> Result<ResultReply, GatewayError> {
        self.submit_raw(id, to_payload(spec))
    }

    pub fn submit_raw(&mut self, id: JobId, payload: String) -> Result<ResultReply, GatewayError> {
        if !self.is_open() {
            return Err(GatewayError::Closed(self.alloc.id));
        }
        if self.alloc.remaining().is_zero() {
            self.close();
            return Err(GatewayError::TimeLimit(self.alloc.id));
        }
        let g = self.gateway.clone();
        let t0 = Instant::now();
        let _route = g.route.acquire();
        let route_wait = t0.elapsed().as_secs_f64();
        let injected = g.draw_latency();
        g.inject(injected);
        if self.conn.is_none() {
            self.conn = Some(g.connect()?);
        }
        let env = Envelope::new(MsgType::Submit, id, payload);
        let reply = g.exchange(self.conn.as_mut().expect("just opened"), &env, &self.alloc);
        drop(_route);
        match reply {
            Ok(reply) => g.account(reply, id, t0, route_wait, injected),
            Err(e) => {
                self.close();
                Err(e)
            }
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

/// Process-unique job ids: a random high half and a counter low half.
pub fn fresh_job_id() -> JobId {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    static PREFIX: std::sync::OnceLock<u64> = std::sync::OnceLock::new();
    let hi = *PREFIX.get_or_init(rand::random::<u64>);
    JobId::from_u128(((hi as u128) << 64) | COUNTER.fetch_add(1, Ordering::SeqCst) as u128)
}

pub const CSV_HEADER: [&str; 8] =
    ["mode", "job_id", "queue_wait", "injected", "transport", "compile", "execute", "total"];

pub fn write_latency_csv<W: io::Write>(w: W, records: &[LatencyRecord]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.mode.clone(),
            r.job_id.to_string(),
            r.queue_wait.to_string(),
            r.injected.to_string(),
            r.transport.to_string(),
            r.compile.to_string(),
            r.execute.to_string(),
            r.total.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_latency_csv<R: io::Read>(r: R) -> Result<Vec<LatencyRecord>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub jobs: usize,
    pub mode_a: Summary,
    pub mode_b: Summary,
    /// Median total of mode A over median total of mode B.
    pub ratio: Option<f64>,
    /// Set when a submission failed and the run stopped early.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub records: Vec<LatencyRecord>,
}

impl ModeReport {
    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> io::Result<(PathBuf, PathBuf)> {
        let json = dir.join(format!("{stem}.json"));
        let csv_path = dir.join(format!("{stem}.csv"));
        std::fs::write(&json, serde_json::to_string_pretty(&serde_json::to_value(self)?)? + "\n")?;
        let f = std::fs::File::create(&csv_path)?;
        write_latency_csv(f, &self.records).map_err(io::Error::other)?;
        Ok((json, csv_path))
    }
}

/// Runs the workload through a mode-A gateway and then a mode-B gateway
/// against the same broker, as batch submissions.
pub fn compare_modes(base: &GatewayConfig, workload: &[JobSpec]) -> ModeReport {
    let mut records = Vec::new();
    let mut error = None;
    'modes: for mode in [IntegrationMode::ResourceManager, IntegrationMode::MessageBus] {
        let g = Gateway::new(GatewayConfig { mode, ..base.clone() });
        for spec in workload {
            if let Err(e) = g.submit_batch(fresh_job_id(), spec) {
                error = Some(format!("mode {mode}: {e}"));
                records.extend(g.latency_log());
                break 'modes;
            }
        }
        records.extend(g.latency_log());
    }
    let totals = |m: &str| records.iter().filter(|r| r.mode == m).map(|r| r.total).collect::<Vec<_>>();
    let (a, b) = (totals("A"), totals("B"));
    let (mode_a, mode_b) = (Summary::of(&a), Summary::of(&b));
    let ratio = (!a.is_empty() && !b.is_empty() && mode_b.median > 0.0).then(|| mode_a.median / mode_b.median);
    ModeReport { jobs: workload.len(), mode_a, mode_b, ratio, partial: error.is_some(), error, records }
}

/// Envelope server in front of a [`Gateway`]. SUBMITs whose spec carries a
/// `session` starting with `interactive` share one interactive session per
/// client connection; everything else is a batch allocation.
pub struct GatewayServer {
    gateway: Arc<Gateway>,
    addr: SocketAddr,
    stopping: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl GatewayServer {
    pub fn start(gateway: Arc<Gateway>, listen: &str) -> io::Result<GatewayServer> {
        let listener = TcpListener::bind(listen)?;
        let addr = listener.local_addr()?;
        let stopping = Arc::new(AtomicBool::new(false));
        let accept = {
            let (g, stop) = (gateway.clone(), stopping.clone());
            thread::Builder::new().name("gateway-accept".into()).spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let g = g.clone();
                    let _ = thread::Builder::new().name("gateway-conn".into()).spawn(move || {
                        if let Err(e) = serve_client(stream, &g) {
                            log::debug!("gateway client closed: {e}");
                        }
                    });
                }
            })?
        };
        log::info!("gateway ({} mode) listening on {addr}", gateway.mode());
        Ok(GatewayServer { gateway, addr, stopping, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for GatewayServer {
    fn drop(&mut self) {
        self.stopping.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn is_interactive(payload: &str) -> bool {
    from_payload::<JobSpec>(payload).ok().and_then(|s| s.session).is_some_and(|s| s.starts_with("interactive"))
}

fn serve_client(mut stream: TcpStream, g: &Arc<Gateway>) -> Result<(), FrameError> {
    stream.set_nodelay(true)?;
    let mut session: Option<Session> = None;
    loop {
        let env = match read_envelope(&mut stream) {
            Ok(Some(e)) => e,
            Ok(None) => return Ok(()),
            Err(FrameError::Wire(e)) => {
                let err = ErrorReply::new(codes::BAD_FRAME, None, e.to_string());
                let _ = write_envelope(&mut stream, &Envelope::new(MsgType::Error, JobId::default(), to_payload(&err)));
                return Err(e.into());
            }
            Err(e) => return Err(e),
        };
        let id = env.job_id;
        let reply = match env.msg_type {
            MsgType::Ping => Ok(Envelope::new(MsgType::Pong, id, "")),
            MsgType::Submit => {
                let outcome = if is_interactive(&env.payload) {
                    if session.as_ref().is_none_or(|s| !s.is_open()) {
                        session = Some(g.open_interactive());
                    }
                    session.as_mut().expect("just opened").submit_raw(id, env.payload)
                } else {
                    g.submit_batch_raw(id, env.payload)
                };
                outcome.map(|r| Envelope::new(MsgType::Result, id, to_payload(&r)))
            }
            MsgType::StatusReq | MsgType::Cancel => g.passthrough(&env),
            other => Ok(Envelope::new(
                MsgType::Error,
                id,
                to_payload(&ErrorReply::new(codes::UNSUPPORTED, None, format!("{other} is not a request"))),
            )),
        };
        let reply = reply.unwrap_or_else(|e| Envelope::new(MsgType::Error, id, to_payload(&e.to_reply())));
        write_envelope(&mut stream, &reply)?;
    }
}
