//! Structured broker event log: one JSON object per line.
//!
//! ```text
//! {"event":"transition","from":null,"job_id":"...","t_ns":1200,"to":"queued"}
//! {"event":"calibration-start","scope":"daily","t_ns":..,"until_ns":..,"version":4}
//! {"event":"model-swap","t_ns":..,"version":4}
//! ```
//!
//! `t_ns` is monotonic nanoseconds since the broker started and never
//! decreases from one line to the next.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use qmio_core::calib::CalibrationScope;
use qmio_core::job::JobState;
use qmio_core::wire::JobId;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Transition { job_id: JobId, from: Option<JobState>, to: JobState },
    CalibrationStart { scope: CalibrationScope, until_ns: u64, version: u64 },
    ModelSwap { version: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t_ns: u64,
    #[serde(flatten)]
    pub event: Event,
}

pub struct EventLog {
    epoch: Instant,
    inner: Mutex<Inner>,
}

struct Inner {
    records: Vec<EventRecord>,
    sink: Option<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn new(epoch: Instant) -> EventLog {
        EventLog { epoch, inner: Mutex::new(Inner { records: Vec::new(), sink: None }) }
    }

    pub fn with_sink(epoch: Instant, sink: Box<dyn Write + Send>) -> EventLog {
        EventLog { epoch, inner: Mutex::new(Inner { records: Vec::new(), sink: Some(sink) }) }
    }

    pub fn ns_since_epoch(&self, at: Instant) -> u64 {
        at.saturating_duration_since(self.epoch).as_nanos() as u64
    }

    /// Appends `event` stamped with the current time; returns the stamp.
    pub fn record(&self, event: Event) -> u64 {
        let mut inner = self.inner.lock().unwrap();
        // stamped under the lock so file order and time order agree
        let t_ns = self.ns_since_epoch(Instant::now());
        let rec = EventRecord { t_ns, event };
        if let Some(sink) = inner.sink.as_mut() {
            let line = serde_json::to_string(&rec).expect("events serialize");
            if let Err(e) = writeln!(sink, "{line}").and_then(|_| sink.flush()) {
                log::warn!("event log write failed: {e}");
            }
        }
        inner.records.push(rec);
        t_ns
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.inner.lock().unwrap().records.clone()
    }
}

pub fn parse_event_lines(text: &str) -> Result<Vec<EventRecord>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
