//! Control-node broker daemon.

use std::fs::File;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use qmio::broker::{Broker, BrokerConfig, CalibrationWindow, WindowPolicy};
use qmio::model_io::load_or_bundled;
use qmio_core::engine::{EngineConfig, EngineKind, DEFAULT_MAX_QUBITS};
use qmio_core::transpile::StalePolicy;

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Echo,
    Statevector,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stale {
    Warn,
    Reject,
}

#[derive(Clone, Copy, ValueEnum)]
enum Window {
    Queue,
    Reject,
}

#[derive(Parser)]
#[command(version, about = "Run the quantum control node broker")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:5555")]
    listen: String,
    /// Hardware model JSON; the bundled 32-qubit model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "statevector")]
    engine: Engine,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_QUBITS)]
    max_qubits: usize,
    #[arg(long, default_value_t = 16)]
    max_queue_depth: usize,
    /// Per-job timeout in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long)]
    reject_uncompiled: bool,
    #[arg(long, value_enum, default_value = "warn")]
    stale: Stale,
    /// Real seconds to hold the QPU per second of estimated wall time.
    #[arg(long, default_value_t = 0.0)]
    wall_time_scale: f64,
    #[arg(long, value_enum, default_value = "queue")]
    calibration_policy: Window,
    /// Append the JSON-lines event log here.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let model = load_or_bundled(args.model.as_deref()).context("loading hardware model")?;
    let kind = match args.engine {
        Engine::Echo => EngineKind::Echo,
        Engine::Statevector => EngineKind::Statevector,
    };
    let cfg = BrokerConfig {
        listen: args.listen,
        engine: EngineConfig::new(kind, args.max_qubits, args.seed)?,
        max_queue_depth: args.max_queue_depth,
        per_job_timeout: Duration::try_from_secs_f64(args.timeout).context("--timeout")?,
        reject_uncompiled: args.reject_uncompiled,
        stale_policy: match args.stale {
            Stale::Warn => StalePolicy::Warn,
            Stale::Reject => StalePolicy::Reject,
        },
        compile_seed: args.seed,
        wall_time_scale: args.wall_time_scale,
        calibration: CalibrationWindow {
            policy: match args.calibration_policy {
                Window::Queue => WindowPolicy::Queue,
                Window::Reject => WindowPolicy::Reject,
            },
            ..CalibrationWindow::default()
        },
    };
    let sink = match &args.event_log {
        Some(p) => Some(Box::new(
            File::options().create(true).append(true).open(p).with_context(|| format!("opening {}", p.display()))?,
        ) as Box<dyn std::io::Write + Send>),
        None => None,
    };
    log::info!("model {} v{} ({} qubits), {} engine", model.name, model.version, model.n_qubits(), kind);
    let broker = Broker::start_with_log(cfg, model, sink)?;
    broker.wait();
    Ok(())
}
