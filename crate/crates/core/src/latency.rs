//! Scheduler-latency distributions and summary statistics for latency logs.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::wire::JobId;

/// Source of injected resource-manager dispatch delays, in seconds.
pub trait LatencyDistribution: Send + Sync {
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    /// Inclusive support bounds.
    fn bounds(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformLatency {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("latency range [{min}, {max}] must be finite, non-negative and ordered")]
pub struct LatencyRangeError {
    pub min: f64,
    pub max: f64,
}

impl UniformLatency {
    pub fn new(min: f64, max: f64) -> Result<UniformLatency, LatencyRangeError> {
        if !(min.is_finite() && max.is_finite() && 0.0 <= min && min <= max) {
            return Err(LatencyRangeError { min, max });
        }
        Ok(UniformLatency { min, max })
    }
}

impl Default for UniformLatency {
    fn default() -> Self {
        UniformLatency { min: 1.0, max: 3.0 }
    }
}

impl LatencyDistribution for UniformLatency {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match Uniform::new_inclusive(self.min, self.max) {
            Ok(d) => d.sample(rng),
            Err(_) => self.min,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }
}

/// Constant delay; useful for replaying a measured trace value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedLatency(pub f64);

impl LatencyDistribution for FixedLatency {
    fn sample(&self, _: &mut dyn RngCore) -> f64 {
        self.0
    }

    fn bounds(&self) -> (f64, f64) {
        (self.0, self.0)
    }
}

impl<T: LatencyDistribution + ?Sized> LatencyDistribution for Box<T> {
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        (**self).sample(rng)
    }

    fn bounds(&self) -> (f64, f64) {
        (**self).bounds()
    }
}

/// One submission's latency split, seconds. `transport` is the remainder of
/// `total` after the other components, so the parts always add up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub mode: String,
    pub job_id: JobId,
    pub queue_wait: f64,
    pub injected: f64,
    pub transport: f64,
    pub compile: f64,
    pub execute: f64,
    pub total: f64,
}

impl LatencyRecord {
    pub fn components_sum(&self) -> f64 {
        self.queue_wait + self.injected + self.transport + self.compile + self.execute
    }
}

/// Linearly interpolated quantile, `q` in [0, 1]. `None` for empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub p95: f64,
    pub total: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        Summary {
            count: values.len(),
            median: quantile(values, 0.5).unwrap_or(0.0),
            p95: quantile(values, 0.95).unwrap_or(0.0),
            total: values.iter().sum(),
        }
    }
}
