//! Calibration runs, calendar simulation and metrics export.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use qmio::metrics::{export_metrics, read_history, write_history};
use qmio::model_io::{load_or_bundled, save_model};
use qmio_core::calib::{
    run_calibration, simulate_calendar, CalendarPolicy, CalibrationJitter, CalibrationScope, DriftParams,
};
use qmio_core::hardware::NominalCalibration;

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    Daily,
    Weekly,
}

#[derive(Parser)]
#[command(version, about = "Calibrate the hardware model and export monitoring metrics")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Recalibrate a model, bumping its version.
    Run {
        #[arg(long, value_enum)]
        scope: Scope,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Where to write the new model; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append the resulting calibration set to this JSON-lines file.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Unix seconds to stamp; now when omitted.
        #[arg(long)]
        now: Option<i64>,
    },
    /// Drift and calibrate over a span of days under the weekday policy.
    Simulate {
        #[arg(long, default_value_t = 14)]
        days: u32,
        /// Unix seconds; rounded down to midnight.
        #[arg(long, default_value_t = 0)]
        start: i64,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        history: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write `timestamp,metric,target,value` rows for sets in [from, to].
    Export {
        #[arg(long)]
        history: PathBuf,
        #[arg(long, default_value_t = i64::MIN)]
        from: i64,
        #[arg(long, default_value_t = i64::MAX)]
        to: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn open_history(p: &Path) -> anyhow::Result<File> {
    File::options().create(true).append(true).open(p).with_context(|| format!("opening {}", p.display()))
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    match args.cmd {
        Cmd::Run { scope, model, out, history, seed, now } => {
            let m = load_or_bundled(model.as_deref())?;
            let now = match now {
                Some(t) => t,
                None => SystemTime::now().duration_since(UNIX_EPOCH)?.as_secs() as i64,
            };
            let scope = match scope {
                Scope::Daily => CalibrationScope::Daily,
                Scope::Weekly => CalibrationScope::Weekly,
            };
            let (next, set) =
                run_calibration(&m, scope, seed, now, &NominalCalibration::default(), &CalibrationJitter::default());
            if let Some(h) = history {
                write_history(open_history(&h)?, &[set])?;
            }
            match out {
                Some(p) => save_model(&p, &next)?,
                None => print!("{}", qmio::model_io::model_to_json(&next)),
            }
            eprintln!("{} v{} -> v{}", m.name, m.version, next.version);
        }
        Cmd::Simulate { days, start, model, history, seed } => {
            let m = load_or_bundled(model.as_deref())?;
            let run = simulate_calendar(
                &m,
                start,
                days,
                &CalendarPolicy::default(),
                &DriftParams::default(),
                &NominalCalibration::default(),
                seed,
            );
            write_history(open_history(&history)?, &run.history)?;
            println!(
                "{} daily, {} weekly calibrations; model v{} -> v{}; {} snapshots",
                run.count(CalibrationScope::Daily),
                run.count(CalibrationScope::Weekly),
                m.version,
                run.model.version,
                run.history.len()
            );
        }
        Cmd::Export { history, from, to, out } => {
            let f = File::open(&history).with_context(|| format!("opening {}", history.display()))?;
            let sets = read_history(BufReader::new(f))?;
            let sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
                None => Box::new(io::stdout().lock()),
            };
            let rows = export_metrics(sink, &sets, from..=to)?;
            eprintln!("{rows} rows");
        }
    }
    Ok(())
}
