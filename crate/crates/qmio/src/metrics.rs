//! Calibration metrics as a long-format CSV time series:
//! `timestamp,metric,target,value`.
//!
//! Qubit metrics target the qubit index (`7`), edge metrics the pair
//! (`3-4`), and the mix-chamber temperature targets `mxc`. Values are
//! written in shortest round-trip form, so export then parse is lossless.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::ops::RangeInclusive;

use qmio_core::calib::{CalibrationSet, EdgeCalibration, MetricsSnapshot, QubitCalibration};

pub const HEADER: [&str; 4] = ["timestamp", "metric", "target", "value"];
const QUBIT_METRICS: [&str; 4] = ["t1", "t2", "readout_fidelity", "single_qubit_fidelity"];
const EDGE_METRIC: &str = "two_qubit_fidelity";
const TEMPERATURE: &str = "mix_chamber_temperature";
const TEMPERATURE_TARGET: &str = "mxc";

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
}

/// Writes every set whose timestamp falls in `range`, in history order.
pub fn export_metrics<W: Write>(
    w: W,
    history: &[CalibrationSet],
    range: RangeInclusive<i64>,
) -> Result<usize, csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HEADER)?;
    let mut rows = 0;
    for set in history.iter().filter(|s| range.contains(&s.timestamp)) {
        let ts = set.timestamp.to_string();
        for (i, q) in set.qubits.iter().enumerate() {
            let values = [q.t1, q.t2, q.readout_fidelity, q.single_qubit_fidelity];
            for (metric, v) in QUBIT_METRICS.iter().zip(values) {
                out.write_record([ts.as_str(), metric, &i.to_string(), &v.to_string()])?;
                rows += 1;
            }
        }
        for e in &set.edges {
            out.write_record([
                ts.as_str(),
                EDGE_METRIC,
                &format!("{}-{}", e.a, e.b),
                &e.two_qubit_fidelity.to_string(),
            ])?;
            rows += 1;
        }
        out.write_record([ts.as_str(), TEMPERATURE, TEMPERATURE_TARGET, &set.mix_chamber_temperature.to_string()])?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}

#[derive(Default)]
struct Partial {
    qubits: BTreeMap<usize, [Option<f64>; 4]>,
    edges: Vec<EdgeCalibration>,
    temperature: Option<f64>,
}

/// Parses an exported document back into snapshots, one per timestamp.
pub fn parse_metrics<R: io::Read>(r: R) -> Result<Vec<MetricsSnapshot>, MetricsError> {
    let mut reader = csv::Reader::from_reader(r);
    if reader.headers()?.iter().ne(HEADER) {
        return Err(MetricsError::Row { row: 0, message: "unexpected header".into() });
    }
    // insertion order of timestamps is export order
    let mut order: Vec<i64> = Vec::new();
    let mut sets: BTreeMap<i64, Partial> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |message: String| MetricsError::Row { row, message };
        let ts: i64 = rec[0].parse().map_err(|_| bad(format!("bad timestamp `{}`", &rec[0])))?;
        let value: f64 = rec[3].parse().map_err(|_| bad(format!("bad value `{}`", &rec[3])))?;
        let p = sets.entry(ts).or_insert_with(|| {
            order.push(ts);
            Partial::default()
        });
        let (metric, target) = (&rec[1], &rec[2]);
        if let Some(k) = QUBIT_METRICS.iter().position(|m| *m == metric) {
            let q: usize = target.parse().map_err(|_| bad(format!("bad qubit `{target}`")))?;
            p.qubits.entry(q).or_default()[k] = Some(value);
        } else if metric == EDGE_METRIC {
            let (a, b) = target
                .split_once('-')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| bad(format!("bad edge `{target}`")))?;
            p.edges.push(EdgeCalibration { a, b, two_qubit_fidelity: value });
        } else if metric == TEMPERATURE {
            p.temperature = Some(value);
        } else {
            return Err(bad(format!("unknown metric `{metric}`")));
        }
    }
    order
        .into_iter()
        .map(|ts| {
            let p = sets.remove(&ts).expect("every ordered timestamp has a set");
            let missing = |what: &str| MetricsError::Row { row: 0, message: format!("timestamp {ts}: missing {what}") };
            let mut qubits = Vec::with_capacity(p.qubits.len());
            for (expect, (q, vals)) in p.qubits.into_iter().enumerate() {
                if q != expect {
                    return Err(missing(&format!("qubit {expect}")));
                }
                let [Some(t1), Some(t2), Some(readout_fidelity), Some(single_qubit_fidelity)] = vals else {
                    return Err(missing(&format!("a metric of qubit {q}")));
                };
                qubits.push(QubitCalibration { t1, t2, readout_fidelity, single_qubit_fidelity });
            }
            let mix_chamber_temperature = p.temperature.ok_or_else(|| missing(TEMPERATURE))?;
            Ok(MetricsSnapshot { timestamp: ts, qubits, edges: p.edges, mix_chamber_temperature })
        })
        .collect()
}

/// Calibration history files hold one JSON [`CalibrationSet`] per line.
pub fn read_history<R: BufRead>(r: R) -> io::Result<Vec<CalibrationSet>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn write_history<W: Write>(mut w: W, history: &[CalibrationSet]) -> io::Result<()> {
    for set in history {
        serde_json::to_writer(&mut w, set)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
