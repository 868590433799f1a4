//! Block credits: per-genotype, per-depth running estimates of the fitness
//! gain a block brings on top of the blocks before it, and the sampling
//! distribution guided mutation derives from them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{GenotypeId, MAX_BLOCKS, NUM_GENOTYPES};

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Debug, Error, PartialEq)]
pub enum CreditError {
    #[error("prefix fitness list is empty")]
    EmptyPrefix,
    #[error("{prefix} prefix values for {depths} active depths")]
    DepthMismatch { prefix: usize, depths: usize },
    #[error("index out of range: genotype {genotype}, depth {depth}")]
    OutOfRange { genotype: usize, depth: usize },
    #[error("credit value is not finite: {0}")]
    NonFinite(f64),
    #[error("invalid credit matrix: {0}")]
    Invalid(String),
}

/// Credits of consecutive active blocks: `prefix[k] - prefix[k-1]`, with the
/// floor fitness standing in before the first block. `depths` are the
/// chromosome positions of the active blocks.
pub fn credit_from_prefix(
    floor: f64,
    prefix: &[f64],
    depths: &[usize],
) -> Result<Vec<(usize, f64)>, CreditError> {
    if prefix.is_empty() {
        return Err(CreditError::EmptyPrefix);
    }
    if prefix.len() != depths.len() {
        return Err(CreditError::DepthMismatch { prefix: prefix.len(), depths: depths.len() });
    }
    let mut before = floor;
    Ok(depths
        .iter()
        .zip(prefix)
        .map(|(&d, &f)| {
            let c = f - before;
            before = f;
            (d, c)
        })
        .collect())
}

/// Dense credit matrix indexed `[genotype][depth]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditMatrix {
    pub alpha: f64,
    pub epsilon: f64,
    values: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
}

impl Default for CreditMatrix {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA, DEFAULT_EPSILON).expect("default coefficients are valid")
    }
}

impl CreditMatrix {
    pub fn new(alpha: f64, epsilon: f64) -> Result<Self, CreditError> {
        let m = CreditMatrix {
            alpha,
            epsilon,
            values: vec![vec![0.0; MAX_BLOCKS]; NUM_GENOTYPES],
            counts: vec![vec![0; MAX_BLOCKS]; NUM_GENOTYPES],
        };
        m.check()?;
        Ok(m)
    }

    /// Checks shape and coefficient invariants, e.g. after deserialization.
    pub fn check(&self) -> Result<(), CreditError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CreditError::Invalid(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CreditError::Invalid(format!("epsilon {} not positive", self.epsilon)));
        }
        let values_ok = self.values.len() == NUM_GENOTYPES
            && self.values.iter().all(|r| r.len() == MAX_BLOCKS);
        let counts_ok = self.counts.len() == NUM_GENOTYPES
            && self.counts.iter().all(|r| r.len() == MAX_BLOCKS);
        if !values_ok || !counts_ok {
            return Err(CreditError::Invalid("matrix shape".into()));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CreditError::Invalid("non-finite entry".into()));
        }
        Ok(())
    }

    fn index(j: GenotypeId, depth: usize) -> Result<(usize, usize), CreditError> {
        let genotype = j.index();
        if genotype >= NUM_GENOTYPES || depth >= MAX_BLOCKS {
            return Err(CreditError::OutOfRange { genotype, depth });
        }
        Ok((genotype, depth))
    }

    pub fn value(&self, j: GenotypeId, depth: usize) -> Result<f64, CreditError> {
        let (r, c) = Self::index(j, depth)?;
        Ok(self.values[r][c])
    }

    pub fn count(&self, j: GenotypeId, depth: usize) -> Result<u64, CreditError> {
        let (r, c) = Self::index(j, depth)?;
        Ok(self.counts[r][c])
    }

    pub fn total_observations(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Exponential moving average `alpha * old + (1 - alpha) * credit`. The
    /// first observation of a cell is stored as is.
    pub fn update(&mut self, j: GenotypeId, depth: usize, credit: f64) -> Result<(), CreditError> {
        if !credit.is_finite() {
            return Err(CreditError::NonFinite(credit));
        }
        let (r, c) = Self::index(j, depth)?;
        let cell = &mut self.values[r][c];
        *cell = if self.counts[r][c] == 0 {
            credit
        } else {
            self.alpha * *cell + (1.0 - self.alpha) * credit
        };
        self.counts[r][c] += 1;
        Ok(())
    }

    /// Value assumed for cells never observed: the mean over every observed
    /// cell of the whole matrix (0 before any observation).
    pub fn prior(&self) -> f64 {
        let (sum, n) = self
            .values
            .iter()
            .flatten()
            .zip(self.counts.iter().flatten())
            .filter(|(_, &n)| n > 0)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        if n == 0 { 0.0 } else { sum / n as f64 }
    }

    /// Column `depth` with unobserved cells set to [`prior`](Self::prior).
    /// `None` when the column has no observation.
    fn filled_column(&self, depth: usize) -> Option<Vec<f64>> {
        if (0..NUM_GENOTYPES).all(|j| self.counts[j][depth] == 0) {
            return None;
        }
        let prior = self.prior();
        Some(
            (0..NUM_GENOTYPES)
                .map(|j| if self.counts[j][depth] > 0 { self.values[j][depth] } else { prior })
                .collect(),
        )
    }

    /// Shifts column `depth` so that its minimum becomes `epsilon`.
    pub fn normalize_column(&self, depth: usize) -> Result<Vec<f64>, CreditError> {
        if depth >= MAX_BLOCKS {
            return Err(CreditError::OutOfRange { genotype: 0, depth });
        }
        Ok(match self.filled_column(depth) {
            Some(col) => shift_to_epsilon(&col, self.epsilon),
            None => vec![self.epsilon; NUM_GENOTYPES],
        })
    }

    /// Sampling distribution over all genotypes at `depth`, proportional to
    /// squared normalized credit.
    pub fn selection_probabilities(&self, depth: usize) -> Result<Vec<f64>, CreditError> {
        Ok(squared_proportions(&self.normalize_column(depth)?))
    }
}

/// `c - (min(c) - epsilon)` elementwise.
pub fn shift_to_epsilon(column: &[f64], epsilon: f64) -> Vec<f64> {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    column.iter().map(|&c| c - (min - epsilon)).collect()
}

/// `c^2 / sum(c^2)` elementwise.
pub fn squared_proportions(normalized: &[f64]) -> Vec<f64> {
    let total: f64 = normalized.iter().map(|c| c * c).sum();
    normalized.iter().map(|c| c * c / total).collect()
}
