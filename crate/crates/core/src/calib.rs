//! Calibration drift and the weekday recalibration calendar.
//!
//! Metrics follow an exact Ornstein-Uhlenbeck transition toward a degraded
//! attractor between calibrations; a calibration resets them to nominal
//! values plus seeded jitter and bumps the model version. Drift rates are
//! configuration, not measurements of any real device.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::hardware::{HardwareModel, NominalCalibration};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub t1: f64,
    pub t2: f64,
    pub readout_fidelity: f64,
    pub single_qubit_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCalibration {
    pub a: usize,
    pub b: usize,
    pub two_qubit_fidelity: f64,
}

/// Benchmarking fidelities: stored fidelity plus seeded measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub timestamp: i64,
    pub single_qubit: Vec<f64>,
    pub two_qubit: Vec<f64>,
}

/// Point-in-time calibration state of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    /// Unix seconds.
    pub timestamp: i64,
    /// Unix seconds of the T2 measurement the `t2` values come from.
    pub t2_timestamp: i64,
    pub qubits: Vec<QubitCalibration>,
    pub edges: Vec<EdgeCalibration>,
    /// Kelvin.
    pub mix_chamber_temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkRecord>,
}

/// The exported time-series projection of a [`CalibrationSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub timestamp: i64,
    pub qubits: Vec<QubitCalibration>,
    pub edges: Vec<EdgeCalibration>,
    pub mix_chamber_temperature: f64,
}

impl CalibrationSet {
    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            timestamp: self.timestamp,
            qubits: self.qubits.clone(),
            edges: self.edges.clone(),
            mix_chamber_temperature: self.mix_chamber_temperature,
        }
    }

    /// Probabilities in [0, 1], positive coherence times, `t2 <= 2 t1`.
    pub fn is_physical(&self) -> bool {
        let p = |x: f64| (0.0..=1.0).contains(&x);
        self.qubits.iter().all(|q| {
            q.t1 > 0.0 && q.t2 > 0.0 && q.t2 <= 2.0 * q.t1 && p(q.readout_fidelity) && p(q.single_qubit_fidelity)
        }) && self.edges.iter().all(|e| p(e.two_qubit_fidelity))
            && self.mix_chamber_temperature > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub attractor: f64,
    /// Mean-reversion rate in 1/s.
    pub rate: f64,
    /// Diffusion in units of the metric per sqrt(s).
    pub volatility: f64,
}

impl OuParams {
    /// Exact transition of the mean-reverting process over `dt` seconds.
    fn step(&self, x: f64, dt: f64, normal: f64) -> f64 {
        let decay = libm::exp(-self.rate * dt);
        let var = if self.rate > 0.0 {
            self.volatility * self.volatility * (1.0 - decay * decay) / (2.0 * self.rate)
        } else {
            self.volatility * self.volatility * dt
        };
        self.attractor + (x - self.attractor) * decay + libm::sqrt(var) * normal
    }

    /// Expected value after `dt` seconds starting from `x`.
    pub fn mean_after(&self, x: f64, dt: f64) -> f64 {
        self.attractor + (x - self.attractor) * libm::exp(-self.rate * dt)
    }
}

/// Mean-reversion rate giving a 0.5 % fidelity loss over one idle day from
/// nominal toward the default attractors (gap ~0.019 to 0.02).
pub const DEFAULT_DRIFT_RATE: f64 = 3.53e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub t1: OuParams,
    pub t2: OuParams,
    pub readout_fidelity: OuParams,
    pub single_qubit_fidelity: OuParams,
    pub two_qubit_fidelity: OuParams,
    pub mix_chamber_temperature: OuParams,
}

impl Default for DriftParams {
    fn default() -> Self {
        // volatility = stationary_std * sqrt(2 * rate)
        let vol = |std: f64, rate: f64| std * libm::sqrt(2.0 * rate);
        let r = DEFAULT_DRIFT_RATE;
        DriftParams {
            t1: OuParams { attractor: 35e-6, rate: r, volatility: vol(2e-6, r) },
            t2: OuParams { attractor: 40e-6, rate: r, volatility: vol(2e-6, r) },
            readout_fidelity: OuParams { attractor: 0.96, rate: r, volatility: vol(0.002, r) },
            single_qubit_fidelity: OuParams { attractor: 0.98, rate: r, volatility: vol(0.0005, r) },
            two_qubit_fidelity: OuParams { attractor: 0.97, rate: r, volatility: vol(0.002, r) },
            mix_chamber_temperature: OuParams { attractor: 0.012, rate: 1e-5, volatility: vol(0.0005, 1e-5) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DriftError {
    #[error("elapsed time must be non-negative, got {0} s")]
    NegativeElapsed(f64),
}

const MIN_COHERENCE: f64 = 1e-9;

fn clamp_prob(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Advances every metric of `set` by `elapsed` seconds of idle drift.
pub fn apply_drift(
    set: &CalibrationSet,
    elapsed: f64,
    seed: u64,
    params: &DriftParams,
) -> Result<CalibrationSet, DriftError> {
    if elapsed.is_nan() || elapsed < 0.0 {
        return Err(DriftError::NegativeElapsed(elapsed));
    }
    let mut out = set.clone();
    out.timestamp = set.timestamp + libm::round(elapsed) as i64;
    if elapsed == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    for q in &mut out.qubits {
        q.t1 = params.t1.step(q.t1, elapsed, z()).max(MIN_COHERENCE);
        q.t2 = params.t2.step(q.t2, elapsed, z()).max(MIN_COHERENCE).min(2.0 * q.t1);
        q.readout_fidelity = clamp_prob(params.readout_fidelity.step(q.readout_fidelity, elapsed, z()));
        q.single_qubit_fidelity = clamp_prob(params.single_qubit_fidelity.step(q.single_qubit_fidelity, elapsed, z()));
    }
    for e in &mut out.edges {
        e.two_qubit_fidelity = clamp_prob(params.two_qubit_fidelity.step(e.two_qubit_fidelity, elapsed, z()));
    }
    out.mix_chamber_temperature =
        params.mix_chamber_temperature.step(out.mix_chamber_temperature, elapsed, z()).max(1e-4);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationScope {
    Daily,
    Weekly,
}

/// Relative jitter applied on reset, as standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationJitter {
    pub coherence_rel: f64,
    pub fidelity_abs: f64,
    pub benchmark_noise: f64,
}

impl Default for CalibrationJitter {
    fn default() -> Self {
        CalibrationJitter { coherence_rel: 0.02, fidelity_abs: 2e-4, benchmark_noise: 5e-4 }
    }
}

/// Resets metrics to `nominal` plus seeded jitter and returns the new model
/// (version + 1) along with the resulting calibration set.
///
/// The daily scope leaves T2 and its timestamp untouched; the weekly scope
/// additionally re-measures T2 and records benchmarking fidelities.
pub fn run_calibration(
    model: &HardwareModel,
    scope: CalibrationScope,
    seed: u64,
    now: i64,
    nominal: &NominalCalibration,
    jitter: &CalibrationJitter,
) -> (HardwareModel, CalibrationSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = model.calibration_set();
    set.timestamp = now;
    let mut z = || -> f64 { rng.sample(StandardNormal) };
    let fid = |nominal: f64, n: f64| clamp_prob(nominal - (jitter.fidelity_abs * n).abs());
    for q in &mut set.qubits {
        q.t1 = (nominal.t1 * (1.0 + jitter.coherence_rel * z())).max(MIN_COHERENCE);
        q.readout_fidelity = fid(nominal.readout_fidelity, z());
        q.single_qubit_fidelity = fid(nominal.single_qubit_fidelity, z());
        if scope == CalibrationScope::Weekly {
            q.t2 = (nominal.t2 * (1.0 + jitter.coherence_rel * z())).max(MIN_COHERENCE);
        }
        q.t2 = q.t2.min(2.0 * q.t1);
    }
    for e in &mut set.edges {
        e.two_qubit_fidelity = fid(nominal.two_qubit_fidelity, z());
    }
    if scope == CalibrationScope::Weekly {
        set.t2_timestamp = now;
        let noisy = |x: f64, n: f64| clamp_prob(x + jitter.benchmark_noise * n);
        let single_qubit = set.qubits.iter().map(|q| q.single_qubit_fidelity).collect::<Vec<_>>();
        let two_qubit = set.edges.iter().map(|e| e.two_qubit_fidelity).collect::<Vec<_>>();
        set.benchmark = Some(BenchmarkRecord {
            timestamp: now,
            single_qubit: single_qubit.into_iter().map(|f| noisy(f, z())).collect(),
            two_qubit: two_qubit.into_iter().map(|f| noisy(f, z())).collect(),
        });
    }
    let mut next = model.with_calibration(&set);
    next.version = model.version + 1;
    (next, set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Weekday {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Weekday {
    /// Weekday of a unix timestamp (UTC).
    pub fn of(unix: i64) -> Weekday {
        const DAYS: [Weekday; 7] =
            [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri, Weekday::Sat, Weekday::Sun];
        // 1970-01-01 was a Thursday.
        DAYS[(unix.div_euclid(SECONDS_PER_DAY) + 3).rem_euclid(7) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeeklyTask {
    T2Measurement,
    RandomizedBenchmarking,
    MixerCalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarPolicy {
    pub daily_days: BTreeSet<Weekday>,
    pub weekly_day: Weekday,
    pub weekly_tasks: BTreeSet<WeeklyTask>,
    /// Seconds the QPU is unavailable per calibration run.
    pub calibration_duration: f64,
    /// Seconds after midnight (UTC) at which calibration starts.
    pub start_offset: i64,
}

impl Default for CalendarPolicy {
    fn default() -> Self {
        CalendarPolicy {
            daily_days: [Weekday::Mon, Weekday::Tue, Weekday::Wed, Weekday::Thu, Weekday::Fri].into_iter().collect(),
            weekly_day: Weekday::Mon,
            weekly_tasks: [WeeklyTask::T2Measurement, WeeklyTask::RandomizedBenchmarking, WeeklyTask::MixerCalibration]
                .into_iter()
                .collect(),
            calibration_duration: 7200.0,
            start_offset: 7 * 3600,
        }
    }
}

impl CalendarPolicy {
    pub fn is_consistent(&self) -> bool {
        self.daily_days.contains(&self.weekly_day) && self.calibration_duration > 0.0
    }

    /// Scopes to run on a given weekday, in order.
    pub fn scopes_for(&self, day: Weekday) -> Vec<CalibrationScope> {
        let mut out = Vec::new();
        if self.daily_days.contains(&day) {
            out.push(CalibrationScope::Daily);
            if day == self.weekly_day && !self.weekly_tasks.is_empty() {
                out.push(CalibrationScope::Weekly);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEvent {
    pub start: i64,
    pub end: i64,
    pub scope: CalibrationScope,
    pub version_after: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarRun {
    pub events: Vec<CalibrationEvent>,
    /// Snapshot before and after each calibration and at each midnight.
    pub history: Vec<CalibrationSet>,
    pub model: HardwareModel,
}

impl CalendarRun {
    pub fn count(&self, scope: CalibrationScope) -> usize {
        self.events.iter().filter(|e| e.scope == scope).count()
    }
}

/// Simulates `days` days starting at `start` (unix seconds, rounded down to
/// midnight): idle drift between events and calibrations on policy days.
pub fn simulate_calendar(
    model: &HardwareModel,
    start: i64,
    days: u32,
    policy: &CalendarPolicy,
    drift: &DriftParams,
    nominal: &NominalCalibration,
    seed: u64,
) -> CalendarRun {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let midnight = start.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY;
    let mut model = model.clone();
    let mut set = model.calibration_set();
    set.timestamp = midnight;
    set.t2_timestamp = set.t2_timestamp.min(midnight);
    let mut history = alloc::vec![set.clone()];
    let mut events = Vec::new();
    let jitter = CalibrationJitter::default();

    let advance = |set: &CalibrationSet, to: i64, rng: &mut ChaCha8Rng| -> CalibrationSet {
        let dt = (to - set.timestamp).max(0) as f64;
        let mut next = apply_drift(set, dt, rng.next_u64(), drift).expect("non-negative step");
        next.timestamp = to;
        next
    };

    for day in 0..i64::from(days) {
        let day_start = midnight + day * SECONDS_PER_DAY;
        let scopes = policy.scopes_for(Weekday::of(day_start));
        if !scopes.is_empty() {
            let begin = day_start + policy.start_offset;
            set = advance(&set, begin, &mut seeds);
            history.push(set.clone());
            model = model.with_calibration(&set);
            let end = begin + libm::round(policy.calibration_duration) as i64;
            for scope in scopes {
                let (next, calibrated) = run_calibration(&model, scope, seeds.next_u64(), end, nominal, &jitter);
                model = next;
                set = calibrated;
                events.push(CalibrationEvent { start: begin, end, scope, version_after: model.version });
            }
            history.push(set.clone());
        }
        set = advance(&set, day_start + SECONDS_PER_DAY, &mut seeds);
        history.push(set.clone());
    }
    model = model.with_calibration(&set);
    CalendarRun { events, history, model }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardware::generate_hex_lattice;

    fn base() -> CalibrationSet {
        generate_hex_lattice(8).unwrap().calibration_set()
    }

    #[test]
    fn zero_elapsed_is_identity() {
        let s = base();
        assert_eq!(apply_drift(&s, 0.0, 7, &DriftParams::default()).unwrap(), s);
    }

    #[test]
    fn negative_elapsed_rejected() {
        assert_eq!(
            apply_drift(&base(), -1.0, 7, &DriftParams::default()).unwrap_err(),
            DriftError::NegativeElapsed(-1.0)
        );
    }

    #[test]
    fn drift_is_deterministic_per_seed() {
        let p = DriftParams::default();
        let a = apply_drift(&base(), 3600.0, 11, &p).unwrap();
        let b = apply_drift(&base(), 3600.0, 11, &p).unwrap();
        let c = apply_drift(&base(), 3600.0, 12, &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn extreme_volatility_stays_physical() {
        let mut p = DriftParams::default();
        for o in [&mut p.readout_fidelity, &mut p.single_qubit_fidelity, &mut p.two_qubit_fidelity] {
            o.volatility = 1.0;
        }
        p.t1.volatility = 1e-3;
        p.t2.volatility = 1e-3;
        for seed in 0..200 {
            let out = apply_drift(&base(), 86_400.0, seed, &p).unwrap();
            assert!(out.is_physical(), "seed {seed}");
        }
    }

    #[test]
    fn fidelity_decays_half_percent_per_day() {
        let p = DriftParams::default().single_qubit_fidelity;
        let loss = 0.999 - p.mean_after(0.999, 86_400.0);
        assert!((loss - 0.005).abs() < 2e-4, "loss {loss}");
    }

    #[test]
    fn weekday_of_known_dates() {
        assert_eq!(Weekday::of(0), Weekday::Thu);
        // 2024-01-01T00:00:00Z was a Monday.
        assert_eq!(Weekday::of(1_704_067_200), Weekday::Mon);
        assert_eq!(Weekday::of(1_704_067_200 - 1), Weekday::Sun);
    }

    #[test]
    fn daily_calibration_bumps_version_and_keeps_t2() {
        let m = generate_hex_lattice(8).unwrap();
        let drifted = apply_drift(&m.calibration_set(), 5.0 * 86_400.0, 3, &DriftParams::default()).unwrap();
        let m = m.with_calibration(&drifted);
        let (next, set) = run_calibration(
            &m,
            CalibrationScope::Daily,
            1,
            1_000_000,
            &NominalCalibration::default(),
            &CalibrationJitter::default(),
        );
        assert_eq!(next.version, m.version + 1);
        assert_eq!(set.t2_timestamp, drifted.t2_timestamp);
        assert_eq!(set.timestamp, 1_000_000);
        for (a, b) in set.qubits.iter().zip(&drifted.qubits) {
            assert!(a.t2 == b.t2 || a.t2 == 2.0 * a.t1);
        }
        assert!(set.is_physical());
    }

    #[test]
    fn weekly_calibration_refreshes_t2_and_benchmark() {
        let m = generate_hex_lattice(8).unwrap();
        let (_, set) = run_calibration(
            &m,
            CalibrationScope::Weekly,
            1,
            2_000_000,
            &NominalCalibration::default(),
            &CalibrationJitter::default(),
        );
        assert_eq!(set.t2_timestamp, 2_000_000);
        let bench = set.benchmark.expect("weekly scope records benchmarking");
        assert_eq!(bench.timestamp, 2_000_000);
        assert_eq!(bench.single_qubit.len(), 8);
        assert_eq!(bench.two_qubit.len(), set.edges.len());
    }

    #[test]
    fn fourteen_day_cadence() {
        let m = generate_hex_lattice(8).unwrap();
        // any 14 consecutive days contain 10 weekdays and 2 Mondays
        for offset in 0..7 {
            let run = simulate_calendar(
                &m,
                1_704_067_200 + offset * SECONDS_PER_DAY,
                14,
                &CalendarPolicy::default(),
                &DriftParams::default(),
                &NominalCalibration::default(),
                5,
            );
            assert_eq!(run.count(CalibrationScope::Daily), 10);
            assert_eq!(run.count(CalibrationScope::Weekly), 2);
            assert_eq!(run.model.version, m.version + 12);
            assert!(run.events.iter().all(|e| e.end - e.start == 7200));
            assert!(run.events.iter().all(|e| Weekday::of(e.start) < Weekday::Sat));
        }
    }

    #[test]
    fn versions_strictly_increase() {
        let m = generate_hex_lattice(4).unwrap();
        let run = simulate_calendar(
            &m,
            0,
            21,
            &CalendarPolicy::default(),
            &DriftParams::default(),
            &NominalCalibration::default(),
            9,
        );
        assert!(run.events.windows(2).all(|w| w[0].version_after < w[1].version_after));
    }
}
