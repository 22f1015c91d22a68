use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::ClassStats;

/// Effective-number class weighting, `(1 - β) / (1 - β^n)` per class, with
/// `n` the class's decayed count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBalanceState {
    effective_counts: Vec<f64>,
    beta: f64,
}

impl ClassBalanceState {
    pub fn new(classes: usize, beta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::Domain(format!("beta {beta} outside [0, 1)")));
        }
        Ok(Self {
            effective_counts: vec![0.0; classes],
            beta,
        })
    }

    pub fn with_counts(counts: Vec<f64>, beta: f64) -> Result<Self> {
        let mut s = Self::new(counts.len(), beta)?;
        s.effective_counts = counts;
        Ok(s)
    }

    /// Copies the decayed counts of `stats`.
    pub fn sync(&mut self, stats: &ClassStats) {
        self.effective_counts.clear();
        self.effective_counts.extend_from_slice(stats.decayed());
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn classes(&self) -> usize {
        self.effective_counts.len()
    }

    pub fn effective_counts(&self) -> &[f64] {
        &self.effective_counts
    }

    /// Weight of class `m`. Classes with fewer than one effective sample
    /// (including never-seen classes) weigh 1.
    pub fn weight(&self, m: usize) -> f64 {
        let n = self.effective_counts.get(m).copied().unwrap_or(0.0);
        if n < 1.0 || self.beta == 0.0 {
            1.0
        } else {
            (1.0 - self.beta) / (1.0 - self.beta.powf(n))
        }
    }

    /// Average weight of one instance drawn from the decayed class
    /// distribution, `Σ n_m w_m / Σ n_m`. `None` before any class has been
    /// counted.
    pub fn mean_weight(&self) -> Option<f64> {
        let total: f64 = self.effective_counts.iter().sum();
        if total < 1.0 {
            return None;
        }
        let s: f64 = self
            .effective_counts
            .iter()
            .enumerate()
            .map(|(m, &n)| n * self.weight(m))
            .sum();
        Some(s / total)
    }

    /// Per-class weights rescaled so the seen classes average to 1; unseen
    /// classes keep weight 1.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.classes()).map(|m| self.weight(m)).collect();
        let seen: Vec<usize> = (0..self.classes())
            .filter(|&m| self.effective_counts[m] >= 1.0)
            .collect();
        if seen.is_empty() {
            return raw;
        }
        let mean = seen.iter().map(|&m| raw[m]).sum::<f64>() / seen.len() as f64;
        raw.iter()
            .zip(&self.effective_counts)
            .map(|(&w, &n)| if n >= 1.0 { w / mean } else { w })
            .collect()
    }
}

/// Class-balance weight of class `m` (free-function form).
pub fn class_balance_weight(m: usize, state: &ClassBalanceState) -> f64 {
    state.weight(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        for n in [1.0, 2.0, 57.0] {
            let s = ClassBalanceState::with_counts(vec![n], 0.0).unwrap();
            assert_eq!(s.weight(0), 1.0);
        }
        let s = ClassBalanceState::with_counts(vec![1.0, 2.0], 0.9).unwrap();
        assert!((s.weight(0) - 1.0).abs() < 1e-12);
        assert!((s.weight(1) - 0.526_315_789_473_684_2).abs() < 1e-12);
    }

    #[test]
    fn unseen_classes_weigh_one() {
        let s = ClassBalanceState::with_counts(vec![500.0, 0.0], 0.99).unwrap();
        assert_eq!(s.weight(1), 1.0);
        assert!(s.weight(0) < 0.02);
        let w = s.normalized_weights();
        assert_eq!(w[0], 1.0);
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn normalization_preserves_ratios() {
        let s = ClassBalanceState::with_counts(vec![1000.0, 10.0, 2.0], 0.99).unwrap();
        let raw: Vec<f64> = (0..3).map(|m| s.weight(m)).collect();
        let w = s.normalized_weights();
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((w[2] / w[0] - raw[2] / raw[0]).abs() < 1e-9);
        assert!(w[2] > w[1] && w[1] > w[0]);
    }

    #[test]
    fn beta_range_checked() {
        assert!(ClassBalanceState::new(2, 1.0).is_err());
        assert!(ClassBalanceState::new(2, -0.1).is_err());
    }

    #[test]
    fn mean_weight_averages_over_counts() {
        // (100·0.01/(1−0.99^100) + 2·0.01/(1−0.99^2)) / 102
        const MEAN_100_2: f64 = 0.025317575056017116;
        let s = ClassBalanceState::with_counts(vec![100.0, 2.0], 0.99).unwrap();
        assert!((s.mean_weight().unwrap() - MEAN_100_2).abs() < 1e-12);
        assert_eq!(ClassBalanceState::new(3, 0.99).unwrap().mean_weight(), None);
    }

    #[test]
    fn sync_copies_decayed_counts() {
        let mut stats = ClassStats::new(2, 0.5).unwrap();
        stats.update(0).unwrap();
        stats.update(1).unwrap();
        let mut s = ClassBalanceState::new(2, 0.9).unwrap();
        s.sync(&stats);
        assert_eq!(s.effective_counts(), &[0.5, 1.0]);
    }
}
