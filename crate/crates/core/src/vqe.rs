//! Z-string Hamiltonians, expectation estimators and a deterministic
//! coordinate-descent optimizer for small variational loops.
//!
//! Pauli strings are written most-significant qubit first: the rightmost
//! character acts on qubit 0, matching bitstring order when qubit `i` is
//! measured into clbit `i`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub paulis: String,
}

impl PauliTerm {
    /// Qubits carrying a `Z`.
    pub fn z_qubits(&self) -> Vec<usize> {
        self.paulis.chars().rev().enumerate().filter(|&(_, c)| c == 'Z').map(|(i, _)| i).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.paulis.chars().all(|c| c == 'I')
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub terms: Vec<PauliTerm>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HamiltonianError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("term `{0}` has X or Y factors; rotate the ansatz into the Z basis instead")]
    NonZTerm(String),
}

impl Hamiltonian {
    pub fn new(terms: Vec<PauliTerm>) -> Result<Hamiltonian, HamiltonianError> {
        for t in &terms {
            if !t.paulis.chars().all(|c| c == 'I' || c == 'Z') {
                return Err(HamiltonianError::NonZTerm(t.paulis.clone()));
            }
        }
        Ok(Hamiltonian { terms })
    }

    /// Parses lines of `coefficient pauli_string`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Hamiltonian, HamiltonianError> {
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| HamiltonianError::Parse { line: i + 1, message };
            let mut parts = line.split_whitespace();
            let coeff = parts.next().unwrap_or_default();
            let coefficient: f64 = coeff.parse().map_err(|_| err(format!("bad coefficient `{coeff}`")))?;
            if !coefficient.is_finite() {
                return Err(err(format!("non-finite coefficient `{coeff}`")));
            }
            let paulis = parts.next().ok_or_else(|| err(String::from("missing pauli string")))?;
            if parts.next().is_some() {
                return Err(err(String::from("trailing tokens")));
            }
            if let Some(bad) = paulis.chars().find(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
                return Err(err(format!("unknown pauli `{bad}`")));
            }
            terms.push(PauliTerm { coefficient, paulis: String::from(paulis) });
        }
        Hamiltonian::new(terms)
    }

    /// Distinct measurement settings one evaluation needs: one for any
    /// Z-string Hamiltonian with a non-identity term, zero otherwise.
    pub fn measurement_bases(&self) -> usize {
        usize::from(self.terms.iter().any(|t| !t.is_identity()))
    }

    pub fn identity_offset(&self) -> f64 {
        self.terms.iter().filter(|t| t.is_identity()).map(|t| t.coefficient).sum()
    }

    /// Widest pauli string.
    pub fn width(&self) -> usize {
        self.terms.iter().map(|t| t.paulis.len()).max().unwrap_or(0)
    }

    /// Estimate from sampled counts: `sum_b parity(b) * count(b) / shots`
    /// per term. Bitstring character `len - 1 - i` is qubit `i`.
    pub fn expectation_from_counts(&self, counts: &BTreeMap<String, u64>) -> f64 {
        let shots: u64 = counts.values().sum();
        if shots == 0 {
            return self.identity_offset();
        }
        self.terms
            .iter()
            .map(|t| {
                let zs = t.z_qubits();
                let signed: i64 = counts
                    .iter()
                    .map(|(bits, &n)| {
                        let b = bits.as_bytes();
                        let ones = zs.iter().filter(|&&q| q < b.len() && b[b.len() - 1 - q] == b'1').count();
                        if ones % 2 == 0 {
                            n as i64
                        } else {
                            -(n as i64)
                        }
                    })
                    .sum();
                t.coefficient * signed as f64 / shots as f64
            })
            .sum()
    }

    /// Exact value from basis-state probabilities (qubit 0 least significant).
    pub fn expectation_from_probabilities(&self, probabilities: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let mask = t.z_qubits().iter().fold(0usize, |m, &q| m | (1 << q));
                let v: f64 = probabilities
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if (i & mask).count_ones() % 2 == 0 { *p } else { -*p })
                    .sum();
                t.coefficient * v
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Objective evaluations allowed.
    pub max_iterations: usize,
    /// Coarse scan points per coordinate.
    pub grid_points: usize,
    pub lower: f64,
    pub upper: f64,
    /// Golden-section stops once the bracket is narrower than this.
    pub tolerance: f64,
    /// A multi-parameter sweep that improves less than this ends the run.
    pub value_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 30,
            grid_points: 8,
            lower: 0.0,
            upper: TAU,
            tolerance: 1e-3,
            value_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub parameters: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub evaluations: Vec<Evaluation>,
    pub best_parameters: Vec<f64>,
    pub best_value: f64,
    pub converged: bool,
}

struct Budget<'a, F> {
    f: &'a mut F,
    left: usize,
    log: Vec<Evaluation>,
}

impl<F, E> Budget<'_, F>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>, E> {
        if self.left == 0 {
            return Ok(None);
        }
        self.left -= 1;
        let value = (self.f)(x)?;
        self.log.push(Evaluation { parameters: x.to_vec(), value });
        Ok(Some(value))
    }
}

/// Deterministic coordinate descent: per coordinate a uniform grid scan
/// over `[lower, upper)` followed by golden-section refinement around the
/// best grid point. Every objective call counts as one iteration.
pub fn minimize<F, E>(x0: &[f64], cfg: &OptimizerConfig, mut f: F) -> Result<Minimum, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    let mut budget = Budget { f: &mut f, left: cfg.max_iterations, log: Vec::new() };
    let mut x = x0.to_vec();
    let mut best = f64::INFINITY;
    let mut converged = false;
    let invphi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let grid = cfg.grid_points.max(1);
    let step = (cfg.upper - cfg.lower) / grid as f64;

    'sweeps: while budget.left > 0 && !x.is_empty() {
        let before = best;
        for k in 0..x.len() {
            let mut probe = x.clone();
            for i in 0..grid {
                probe[k] = cfg.lower + i as f64 * step;
                let Some(v) = budget.eval(&probe)? else { break 'sweeps };
                if v < best {
                    best = v;
                    x[k] = probe[k];
                }
            }
            let (mut a, mut b) = (x[k] - step, x[k] + step);
            let mut c = b - invphi * (b - a);
            let mut d = a + invphi * (b - a);
            probe[k] = c;
            let Some(mut fc) = budget.eval(&probe)? else { break 'sweeps };
            probe[k] = d;
            let Some(mut fd) = budget.eval(&probe)? else { break 'sweeps };
            for (p, v) in [(c, fc), (d, fd)] {
                if v < best {
                    best = v;
                    x[k] = p;
                }
            }
            while b - a > cfg.tolerance {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - invphi * (b - a);
                    probe[k] = c;
                    let Some(v) = budget.eval(&probe)? else { break 'sweeps };
                    fc = v;
                    if v < best {
                        best = v;
                        x[k] = c;
                    }
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + invphi * (b - a);
                    probe[k] = d;
                    let Some(v) = budget.eval(&probe)? else { break 'sweeps };
                    fd = v;
                    if v < best {
                        best = v;
                        x[k] = d;
                    }
                }
            }
        }
        if x.len() == 1 || before - best < cfg.value_tolerance {
            converged = true;
            break;
        }
    }

    let log = budget.log;
    let (best_parameters, best_value) = match log.iter().min_by(|a, b| a.value.total_cmp(&b.value)) {
        Some(e) => (e.parameters.clone(), e.value),
        None => (x0.to_vec(), f64::NAN),
    };
    Ok(Minimum { evaluations: log, best_parameters, best_value, converged })
}

/// Probabilities of a normalised amplitude vector.
pub fn probabilities(state: &[num_complex::Complex64]) -> Vec<f64> {
    state.iter().map(|a| a.norm_sqr()).collect()
}

/// Exact expectation of `h` on `state`; convenience for tests and reports.
pub fn exact_expectation(h: &Hamiltonian, state: &[num_complex::Complex64]) -> f64 {
    h.expectation_from_probabilities(&probabilities(state))
}

/// Bitstring counts for a fixed basis index, used by tests of the estimator.
pub fn point_counts(bits: &str, shots: u64) -> BTreeMap<String, u64> {
    let mut m = BTreeMap::new();
    m.insert(String::from(bits), shots);
    m
}
