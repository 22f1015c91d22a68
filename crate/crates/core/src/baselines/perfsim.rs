//! Performance-similarity drift detection on confusion matrices.
//!
//! Confusion counts are accumulated batch by batch into a current window,
//! which closes once it holds `min_errors` misclassifications. A closed
//! window is compared with the previous one by a weighted cosine similarity
//! and drift is signaled when the similarity falls below `τ`.
//!
//! Before the cosine each row (true class) is divided by its total, so the
//! comparison is between per-class outcome rates and a majority class cannot
//! drown out the others. Diagonal entries are then scaled by `λ`, which with
//! `λ < 1` gives the error pattern more say than the hit rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfSimConfig {
    /// Diagonal weight `λ`.
    pub lambda: f64,
    /// Similarity threshold `τ`.
    pub threshold: f64,
    pub min_errors: usize,
}

impl Default for PerfSimConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            threshold: 0.95,
            min_errors: 30,
        }
    }
}

impl PerfSimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "perfsim lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "perfsim threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Outcome of one batch update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PerfSimDecision {
    /// The current window is still collecting errors, or no previous window
    /// exists yet.
    Pending,
    /// A window closed but one of the matrices was all zeros.
    Insufficient,
    Tested { similarity: f64, drift: bool },
}

impl PerfSimDecision {
    pub fn is_drift(&self) -> bool {
        matches!(self, PerfSimDecision::Tested { drift: true, .. })
    }
}

/// Row-normalized, `λ`-weighted cosine similarity of two `classes × classes`
/// row-major count matrices. `None` if either has no counts.
pub fn confusion_similarity(prev: &[f64], curr: &[f64], classes: usize, lambda: f64) -> Option<f64> {
    let a = weighted_rates(prev, classes, lambda);
    let b = weighted_rates(curr, classes, lambda);
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn weighted_rates(m: &[f64], classes: usize, lambda: f64) -> Vec<f64> {
    let mut out = m.to_vec();
    for (i, row) in out.chunks_exact_mut(classes).enumerate() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        row[i] *= lambda;
    }
    out
}

#[derive(Debug, Clone)]
pub struct PerfSim {
    config: PerfSimConfig,
    classes: usize,
    prev: Option<Vec<f64>>,
    curr: Vec<f64>,
    curr_errors: usize,
}

impl PerfSim {
    pub fn new(classes: usize, config: PerfSimConfig) -> Result<Self> {
        config.validate()?;
        if classes < 2 {
            return Err(Error::Config("perfsim needs at least two classes".into()));
        }
        Ok(Self {
            config,
            classes,
            prev: None,
            curr: vec![0.0; classes * classes],
            curr_errors: 0,
        })
    }

    pub fn config(&self) -> &PerfSimConfig {
        &self.config
    }

    pub fn reset(&mut self) {
        self.prev = None;
        self.curr.fill(0.0);
        self.curr_errors = 0;
    }

    /// Adds one batch's confusion counts (row = true class, column =
    /// prediction, row-major).
    pub fn update(&mut self, batch_confusion: &[u64]) -> Result<PerfSimDecision> {
        let z = self.classes;
        if batch_confusion.len() != z * z {
            return Err(Error::Domain(format!(
                "confusion has {} entries, expected {}",
                batch_confusion.len(),
                z * z
            )));
        }
        for (i, (c, &n)) in self.curr.iter_mut().zip(batch_confusion).enumerate() {
            *c += n as f64;
            if i / z != i % z {
                self.curr_errors += n as usize;
            }
        }
        if self.curr_errors < self.config.min_errors {
            return Ok(PerfSimDecision::Pending);
        }
        let closed = std::mem::replace(&mut self.curr, vec![0.0; z * z]);
        self.curr_errors = 0;
        let decision = match &self.prev {
            None => PerfSimDecision::Pending,
            Some(prev) => match confusion_similarity(prev, &closed, z, self.config.lambda) {
                None => PerfSimDecision::Insufficient,
                Some(similarity) => PerfSimDecision::Tested {
                    similarity,
                    drift: similarity < self.config.threshold,
                },
            },
        };
        self.prev = Some(closed);
        Ok(decision)
    }
}

/// Row-major confusion counts of `(predicted, actual)` pairs.
pub fn confusion_counts(pairs: impl IntoIterator<Item = (usize, usize)>, classes: usize) -> Result<Vec<u64>> {
    let mut m = vec![0u64; classes * classes];
    for (pred, actual) in pairs {
        if pred >= classes || actual >= classes {
            return Err(Error::Domain(format!(
                "label {actual} or prediction {pred} out of range for {classes} classes"
            )));
        }
        m[actual * classes + pred] += 1;
    }
    Ok(m)
}
