//! Ahead-of-time compiler: QASM in, artifact container out.

use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use qmio::model_io::load_or_bundled;
use qmio_core::qasm::{parse_qasm2, validate_program};
use qmio_core::transpile::compile_aot;

#[derive(Parser)]
#[command(version, about = "Compile an OpenQASM 2 program against a hardware model")]
struct Args {
    input: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Routing tie-break seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the artifact here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let model = load_or_bundled(args.model.as_deref())?;
    let src = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let program = parse_qasm2(&src).with_context(|| args.input.display().to_string())?;
    let program = validate_program(program, &model)?;
    let artifact = compile_aot(&program, &model, args.seed)?;
    match &args.out {
        Some(p) => fs::write(p, artifact.to_text()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", artifact.to_text()),
    }
    eprintln!(
        "compiled for {} v{}; parameters: [{}]",
        artifact.model_name,
        artifact.model_version,
        artifact.parameter_names.join(", ")
    );
    Ok(())
}
