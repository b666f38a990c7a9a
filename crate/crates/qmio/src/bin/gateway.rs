//! Gateway in front of a broker, in resource-manager (A) or message-bus (B) mode.

use std::net::ToSocketAddrs;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Parser;
use qmio::gateway::{Gateway, GatewayConfig, GatewayServer, Injection, IntegrationMode};
use qmio_core::latency::UniformLatency;

#[derive(Parser)]
#[command(version, about = "Forward client jobs to the control node broker")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:5555")]
    broker: String,
    #[arg(long, default_value = "B")]
    mode: IntegrationMode,
    #[arg(long, default_value_t = 1.0)]
    latency_min: f64,
    #[arg(long, default_value_t = 3.0)]
    latency_max: f64,
    #[arg(long, default_value = "127.0.0.1:5556")]
    listen: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record mode-A dispatch delay without sleeping.
    #[arg(long)]
    virtual_latency: bool,
    #[arg(long, default_value_t = 7200)]
    batch_limit: u64,
    #[arg(long, default_value_t = 300)]
    interactive_limit: u64,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let Some(broker) = args.broker.to_socket_addrs().context("resolving --broker")?.next() else {
        bail!("--broker {} resolves to no address", args.broker);
    };
    let cfg = GatewayConfig {
        latency: Arc::new(UniformLatency::new(args.latency_min, args.latency_max)?),
        injection: if args.virtual_latency { Injection::Virtual } else { Injection::Sleep },
        seed: args.seed,
        batch_time_limit: Duration::from_secs(args.batch_limit),
        interactive_time_limit: Duration::from_secs(args.interactive_limit),
        ..GatewayConfig::new(broker, args.mode)
    };
    let server = GatewayServer::start(Arc::new(Gateway::new(cfg)), &args.listen)
        .with_context(|| format!("listening on {}", args.listen))?;
    server.wait();
    Ok(())
}
