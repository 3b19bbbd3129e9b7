use crate::error::{Error, Result};

/// Default number of tracked levels above the ground state.
pub const DEFAULT_TRUNCATION: usize = 128;
/// Largest allowed population in the highest tracked level.
pub const TAIL_LIMIT: f64 = 1e-6;

/// Populations `p(0..=N)` of one motional mode plus the population of the
/// prepared qubit level.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDistribution {
    probs: Vec<f64>,
    pub spin_up: f64,
}

impl FockDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParameter("empty Fock distribution".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0 + 1e-12).contains(p)) {
            return Err(Error::InvalidParameter("populations must lie in [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("populations sum to {sum}, not 1")));
        }
        Ok(Self { probs, spin_up: 1.0 })
    }

    pub fn fock(n: usize) -> Self {
        let mut probs = vec![0.0; (n + 1).max(DEFAULT_TRUNCATION + 1)];
        probs[n] = 1.0;
        Self { probs, spin_up: 1.0 }
    }

    pub fn ground() -> Self {
        Self::fock(0)
    }

    /// Thermal state with mean occupation `n_bar`, truncated at the first
    /// doubling of the default size whose tail is below the limit.
    pub fn thermal(n_bar: f64) -> Result<Self> {
        if !(n_bar >= 0.0 && n_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!("n̄ must be ≥ 0, got {n_bar}")));
        }
        let q = n_bar / (n_bar + 1.0);
        let mut n = DEFAULT_TRUNCATION;
        loop {
            let mut probs: Vec<f64> = (0..=n).map(|k| q.powi(k as i32)).collect();
            let sum: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= sum);
            if probs[n] < TAIL_LIMIT {
                return Ok(Self { probs, spin_up: 1.0 });
            }
            n *= 2;
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Highest tracked level.
    pub fn truncation(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn tail(&self) -> f64 {
        *self.probs.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Track levels up to `n` (never shrinks).
    pub fn extend_to(&mut self, n: usize) {
        if n + 1 > self.probs.len() {
            self.probs.resize(n + 1, 0.0);
        }
    }

    pub(crate) fn probs_mut(&mut self) -> &mut Vec<f64> {
        &mut self.probs
    }

    /// Highest level with non-negligible population.
    pub(crate) fn support(&self) -> usize {
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}
