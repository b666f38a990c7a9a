//! Runtime client CLI.

use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use qmio::client::{
    benchmark_modes, format_counts, BenchmarkOptions, Overrides, RuntimeClient, RuntimeConfig, SessionKind,
};
use qmio::gateway::Injection;
use qmio_core::engine::OutputFormat;
use qmio_core::latency::UniformLatency;
use qmio_core::transpile::CompiledArtifact;
use qmio_core::vqe::{Hamiltonian, OptimizerConfig};

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Counts,
    Memory,
}

#[derive(Parser)]
#[command(version, about = "Submit circuits and parametric loops to the QPU")]
struct Args {
    #[arg(long, global = true, default_value = "127.0.0.1:5556")]
    gateway: String,
    /// Keep one routed connection for the whole run.
    #[arg(long, global = true)]
    interactive: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one OpenQASM 2 program.
    Submit {
        qasm: PathBuf,
        #[arg(long, default_value_t = 1000)]
        shots: u64,
        #[arg(long)]
        rep_period: Option<f64>,
        #[arg(long, value_enum, default_value = "counts")]
        format: Format,
        /// Print the full reply as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Minimize a Z-string Hamiltonian over a compiled ansatz.
    Vqe {
        #[arg(long)]
        ansatz: PathBuf,
        /// Lines of `coefficient pauli_string`.
        #[arg(long)]
        ham: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 30)]
        max_iterations: usize,
        /// Write the optimization trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compare mode A and mode B latency against a broker.
    Bench {
        #[arg(long, default_value_t = 20)]
        n: usize,
        /// Accepted for symmetry with the report it produces.
        #[arg(long)]
        mode_compare: bool,
        #[arg(long, default_value = "127.0.0.1:5555")]
        broker: String,
        #[arg(long, default_value_t = 100)]
        shots: u64,
        #[arg(long, default_value_t = 1.0)]
        latency_min: f64,
        #[arg(long, default_value_t = 3.0)]
        latency_max: f64,
        #[arg(long)]
        virtual_latency: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn resolve(addr: &str) -> anyhow::Result<SocketAddr> {
    match addr.to_socket_addrs().with_context(|| format!("resolving {addr}"))?.next() {
        Some(a) => Ok(a),
        None => bail!("{addr} resolves to no address"),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let client = |shots| -> anyhow::Result<RuntimeClient> {
        let cfg = RuntimeConfig {
            shots,
            seed: args.seed,
            session: if args.interactive { SessionKind::Interactive } else { SessionKind::Batch },
            ..RuntimeConfig::new(resolve(&args.gateway)?)
        };
        Ok(RuntimeClient::new(cfg)?)
    };
    match args.cmd {
        Cmd::Submit { ref qasm, shots, rep_period, format, json } => {
            let src = fs::read_to_string(qasm).with_context(|| format!("reading {}", qasm.display()))?;
            let o = Overrides {
                shots: Some(shots),
                repetition_period: rep_period,
                output_format: Some(match format {
                    Format::Counts => OutputFormat::Counts,
                    Format::Memory => OutputFormat::Memory,
                }),
            };
            let reply = client(shots)?.run_circuit(&src, o)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&reply)?);
                return Ok(());
            }
            match &reply.result.memory {
                Some(mem) => mem.iter().for_each(|m| println!("{m}")),
                None => println!("{}", format_counts(&reply.result.counts)),
            }
            for w in &reply.warnings {
                eprintln!("warning: {w}");
            }
            eprintln!(
                "engine {} | model v{} | estimated QPU time {:.6} s",
                reply.result.engine, reply.result.model_version, reply.result.estimated_wall_time
            );
            if let Some(l) = &reply.latency {
                eprintln!(
                    "latency {:.4} s (queue {:.4}, injected {:.4}, transport {:.4}, compile {:.4}, execute {:.4})",
                    l.total, l.queue_wait, l.injected, l.transport, l.compile, l.execute
                );
            }
        }
        Cmd::Vqe { ref ansatz, ref ham, shots, max_iterations, ref trace } => {
            let text = fs::read_to_string(ansatz).with_context(|| format!("reading {}", ansatz.display()))?;
            let artifact = CompiledArtifact::from_text(&text)?;
            let h =
                Hamiltonian::parse(&fs::read_to_string(ham).with_context(|| format!("reading {}", ham.display()))?)?;
            let opt = OptimizerConfig { max_iterations, ..OptimizerConfig::default() };
            let t = client(shots)?.run_vqe_toy(&artifact, &h, shots, &opt)?;
            for (i, it) in t.iterations.iter().enumerate() {
                println!("{:>3} {:?} {:+.5}", i + 1, it.parameters, it.value);
            }
            println!("best {:+.5} at {:?} (converged: {})", t.best_value, t.best_parameters, t.converged);
            if let Some(p) = trace {
                fs::write(p, serde_json::to_string_pretty(&t)?)?;
            }
        }
        Cmd::Bench { n, mode_compare: _, ref broker, shots, latency_min, latency_max, virtual_latency, ref out } => {
            let opts = BenchmarkOptions {
                jobs: n,
                shots,
                latency: Arc::new(UniformLatency::new(latency_min, latency_max)?),
                injection: if virtual_latency { Injection::Virtual } else { Injection::Sleep },
                seed: args.seed.unwrap_or(0),
            };
            let (report, json, csv) = benchmark_modes(resolve(broker)?, &opts, out, "mode-compare")?;
            println!(
                "mode A median {:.4} s  p95 {:.4} s  total {:.3} s",
                report.mode_a.median, report.mode_a.p95, report.mode_a.total
            );
            println!(
                "mode B median {:.4} s  p95 {:.4} s  total {:.3} s",
                report.mode_b.median, report.mode_b.p95, report.mode_b.total
            );
            match report.ratio {
                Some(r) => println!("median ratio A/B: {r:.1}x"),
                None => println!("median ratio A/B: n/a"),
            }
            println!("wrote {} and {}", json.display(), csv.display());
            if let Some(e) = report.error {
                bail!("benchmark incomplete: {e}");
            }
        }
    }
    Ok(())
}
