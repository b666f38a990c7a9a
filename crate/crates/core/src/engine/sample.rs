use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EngineError;

/// Tolerated deviation of the state's squared norm from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Pairs (state index bit, clbit). Several pairs may not share a clbit.
pub type MeasureMap = [(usize, usize)];

fn outcome_key(index: usize, map: &MeasureMap) -> usize {
    map.iter().enumerate().fold(0, |acc, (pos, &(bit, _))| acc | (((index >> bit) & 1) << pos))
}

/// Bitstring for a marginal outcome; `map` is ordered by descending clbit
/// so that clbit order reads right to left.
fn render(key: usize, map: &MeasureMap) -> String {
    let mut s = String::with_capacity(map.len());
    for pos in 0..map.len() {
        s.push(if (key >> pos) & 1 == 1 { '1' } else { '0' });
    }
    s.chars().rev().collect()
}

fn ordered(map: &MeasureMap) -> Vec<(usize, usize)> {
    let mut v = map.to_vec();
    v.sort_by_key(|&(_, c)| c);
    v
}

/// Draws `shots` outcomes of measuring the bits in `map` and returns the
/// per-shot bitstrings (clbit 0 is the rightmost character).
pub fn sample_memory(state: &[Complex64], shots: u64, map: &MeasureMap, seed: u64) -> Result<Vec<String>, EngineError> {
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    let drift = (norm - 1.0).abs();
    if drift.is_nan() || drift > NORM_TOLERANCE {
        return Err(EngineError::Unnormalized(norm));
    }
    let map = ordered(map);
    let mut marginal: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, a) in state.iter().enumerate() {
        let p = a.norm_sqr();
        if p > 0.0 {
            *marginal.entry(outcome_key(i, &map)).or_insert(0.0) += p;
        }
    }
    let keys: Vec<usize> = marginal.keys().copied().collect();
    let mut cdf = Vec::with_capacity(keys.len());
    let mut acc = 0.0;
    for p in marginal.values() {
        acc += p;
        cdf.push(acc);
    }
    let labels: Vec<String> = keys.iter().map(|&k| render(k, &map)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        out.push(labels[idx].clone());
    }
    Ok(out)
}

/// Histogram of [`sample_memory`].
pub fn sample_counts(
    state: &[Complex64],
    shots: u64,
    map: &MeasureMap,
    seed: u64,
) -> Result<BTreeMap<String, u64>, EngineError> {
    Ok(histogram(&sample_memory(state, shots, map, seed)?))
}

pub fn histogram(memory: &[String]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for m in memory {
        *counts.entry(m.clone()).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn deterministic_one() {
        let counts = sample_counts(&[c(0.0), c(1.0)], 50, &[(0, 0)], 1).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["1"], 50);
    }

    #[test]
    fn clbit_zero_is_rightmost() {
        // |q1 q0> = |01>, q0 -> c0, q1 -> c1
        let state = [c(0.0), c(1.0), c(0.0), c(0.0)];
        let counts = sample_counts(&state, 3, &[(1, 1), (0, 0)], 0).unwrap();
        assert_eq!(counts["01"], 3);
        // cross-wired: q0 -> c1, q1 -> c0
        let counts = sample_counts(&state, 3, &[(0, 1), (1, 0)], 0).unwrap();
        assert_eq!(counts["10"], 3);
    }

    #[test]
    fn unmeasured_qubits_are_marginalised() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let state = [c(h), c(0.0), c(h), c(0.0)];
        let counts = sample_counts(&state, 100, &[(0, 0)], 3).unwrap();
        assert_eq!(counts["0"], 100);
    }

    #[test]
    fn uniform_two_qubit_within_three_sigma() {
        let state = vec![c(0.5); 4];
        let counts = sample_counts(&state, 40_000, &[(0, 0), (1, 1)], 11).unwrap();
        // multinomial marginal: sigma = sqrt(40000 * 1/4 * 3/4)
        let sigma = libm::sqrt(40_000.0 * 0.25 * 0.75);
        for k in ["00", "01", "10", "11"] {
            let n = counts[k] as f64;
            assert!((n - 10_000.0).abs() <= 3.0 * sigma, "{k}: {n}");
        }
    }

    #[test]
    fn same_seed_same_counts() {
        let state = vec![c(0.5); 4];
        let a = sample_counts(&state, 1000, &[(0, 0), (1, 1)], 5).unwrap();
        assert_eq!(a, sample_counts(&state, 1000, &[(0, 0), (1, 1)], 5).unwrap());
        assert_ne!(a, sample_counts(&state, 1000, &[(0, 0), (1, 1)], 6).unwrap());
    }

    #[test]
    fn unnormalised_state_rejected() {
        assert!(matches!(sample_counts(&[c(1.0), c(1.0)], 1, &[(0, 0)], 0), Err(EngineError::Unnormalized(_))));
    }
}
