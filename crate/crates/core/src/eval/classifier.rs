//! Cost-sensitive online linear classifier used as the base learner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{ClassStats, DEFAULT_DECAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    /// Decay of the class-prior estimate behind the misclassification costs.
    pub decay: f64,
    pub max_cost: f64,
    /// Per-instance retention of the running weight average used for
    /// prediction; 0 predicts with the raw perceptron weights.
    pub averaging: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            decay: DEFAULT_DECAY,
            max_cost: 100.0,
            averaging: 0.999,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "classifier learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!(
                "classifier decay must be in (0, 1), got {}",
                self.decay
            )));
        }
        if !(self.max_cost >= 1.0) {
            return Err(Error::Config(format!(
                "classifier max cost must be >= 1, got {}",
                self.max_cost
            )));
        }
        if !(0.0..1.0).contains(&self.averaging) {
            return Err(Error::Config(format!(
                "classifier averaging must be in [0, 1), got {}",
                self.averaging
            )));
        }
        Ok(())
    }
}

/// Multi-class perceptron with one weight row and bias per class. A
/// mistake on class `y` is scaled by `min(max_cost, p_max / p_y)`, where
/// `p` are the decayed class priors, so rare classes pull harder.
/// Mistakes are judged by the raw weights; scores come from their
/// exponential running average when `averaging > 0`.
#[derive(Debug, Clone)]
pub struct LinearClassifier {
    config: ClassifierConfig,
    dim: usize,
    classes: usize,
    /// Row `c` holds the `dim` weights of class `c` followed by its bias.
    raw: Vec<f64>,
    avg: Vec<f64>,
    stats: ClassStats,
}

fn linear(rows: &[f64], dim: usize, x: &[f64]) -> Vec<f64> {
    rows.chunks_exact(dim + 1)
        .map(|r| r[dim] + r[..dim].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

impl LinearClassifier {
    pub fn new(dim: usize, classes: usize, config: ClassifierConfig) -> Result<Self> {
        config.validate()?;
        if classes < 2 || dim == 0 {
            return Err(Error::Config(format!(
                "classifier needs dim >= 1 and >= 2 classes, got dim {dim}, {classes} classes"
            )));
        }
        Ok(Self {
            dim,
            classes,
            raw: vec![0.0; (dim + 1) * classes],
            avg: vec![0.0; (dim + 1) * classes],
            stats: ClassStats::new(classes, config.decay)?,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Domain(format!(
                "feature vector has {} entries, expected {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Linear response of every class.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let rows = if self.config.averaging > 0.0 { &self.avg } else { &self.raw };
        Ok(linear(rows, self.dim, x))
    }

    /// Highest-scoring class; ties go to the smallest id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Misclassification cost of each class from the current prior estimate.
    pub fn costs(&self) -> Vec<f64> {
        let cap = self.config.max_cost;
        let Some(priors) = self.stats.priors() else {
            return vec![1.0; self.classes];
        };
        let top = priors.iter().cloned().fold(0.0, f64::max);
        priors
            .iter()
            .map(|&p| if p > 0.0 { (top / p).min(cap) } else { cap })
            .collect()
    }

    /// Updates the prior estimate, applies a cost-scaled perceptron step if
    /// the raw weights misclassify `x`, then moves the average.
    pub fn learn(&mut self, x: &[f64], label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::Domain(format!(
                "label {label} out of range for {} classes",
                self.classes
            )));
        }
        self.check(x)?;
        let predicted = argmax(&linear(&self.raw, self.dim, x));
        self.stats.update(label)?;
        if predicted != label {
            let step = self.config.learning_rate * self.costs()[label];
            let w = self.dim + 1;
            let (d, raw) = (self.dim, &mut self.raw);
            for (c, sign) in [(label, step), (predicted, -step)] {
                let row = &mut raw[c * w..(c + 1) * w];
                for (a, v) in row[..d].iter_mut().zip(x) {
                    *a += sign * v;
                }
                row[d] += sign;
            }
        }
        let a = self.config.averaging;
        if a > 0.0 {
            for (m, r) in self.avg.iter_mut().zip(&self.raw) {
                *m = a * *m + (1.0 - a) * r;
            }
        }
        Ok(())
    }

    /// Forgets all weights. The prior estimate is kept so that costs stay
    /// calibrated while the model relearns.
    pub fn reset(&mut self) {
        self.raw.fill(0.0);
        self.avg.fill(0.0);
    }

    /// Forgets the weights of one class.
    pub fn reset_class(&mut self, m: usize) {
        if m < self.classes {
            let w = self.dim + 1;
            self.raw[m * w..(m + 1) * w].fill(0.0);
            self.avg[m * w..(m + 1) * w].fill(0.0);
        }
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clf(classes: usize) -> LinearClassifier {
        LinearClassifier::new(2, classes, ClassifierConfig::default()).unwrap()
    }

    #[test]
    fn ties_go_to_smallest_id() {
        assert_eq!(clf(3).predict(&[1.0, 2.0]).unwrap(), 0);
        assert_eq!(argmax(&[0.5, 2.0, 2.0]), 1);
    }

    #[test]
    fn cost_ratio_follows_priors() {
        let mut c = LinearClassifier::new(
            1,
            2,
            ClassifierConfig {
                decay: 0.999_999,
                max_cost: 1000.0,
                ..Default::default()
            },
        )
        .unwrap();
        for i in 0..10_000 {
            c.stats.update(usize::from(i % 100 == 0)).unwrap();
        }
        let k = c.costs();
        assert_eq!(k[0], 1.0);
        assert!((k[1] / k[0] - 99.0).abs() < 0.1, "{k:?}");
        // Balanced priors give equal costs.
        let mut b = clf(2);
        for i in 0..1000 {
            b.stats.update(i % 2).unwrap();
        }
        let k = b.costs();
        assert!((k[0] - k[1]).abs() < 0.01);
    }

    #[test]
    fn cost_is_capped() {
        let mut c = clf(2);
        for _ in 0..1000 {
            c.stats.update(0).unwrap();
        }
        assert_eq!(c.costs(), vec![1.0, 100.0]);
    }

    #[test]
    fn learns_a_separable_problem() {
        let mut c = clf(2);
        let data = [([1.0, 0.2], 0), ([0.9, -0.1], 0), ([-1.0, 0.1], 1), ([-0.8, -0.3], 1)];
        for _ in 0..20 {
            for (x, y) in &data {
                c.learn(x, *y).unwrap();
            }
        }
        for (x, y) in &data {
            assert_eq!(c.predict(x).unwrap(), *y);
        }
    }

    #[test]
    fn reset_class_clears_only_that_row() {
        let mut c = clf(3);
        c.learn(&[1.0, 1.0], 2).unwrap();
        let before = c.scores(&[1.0, 1.0]).unwrap();
        assert!(before[2] > 0.0 && before[0] < 0.0);
        c.reset_class(2);
        let after = c.scores(&[1.0, 1.0]).unwrap();
        assert_eq!(after[2], 0.0);
        assert_eq!(after[0], before[0]);
        c.reset();
        assert_eq!(c.scores(&[1.0, 1.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(c.costs()[2], 1.0);
        assert_eq!(c.costs()[0], 100.0);
    }

    #[test]
    fn averaged_scores_trail_the_raw_weights() {
        let cfg = |averaging| ClassifierConfig {
            averaging,
            ..Default::default()
        };
        let mut raw = LinearClassifier::new(1, 2, cfg(0.0)).unwrap();
        let mut avg = LinearClassifier::new(1, 2, cfg(0.5)).unwrap();
        for c in [&mut raw, &mut avg] {
            c.learn(&[1.0], 1).unwrap();
        }
        // One step of 0.1 on weight and bias: raw score 0.2, average half of it.
        assert!((raw.scores(&[1.0]).unwrap()[1] - 0.2).abs() < 1e-12);
        assert!((avg.scores(&[1.0]).unwrap()[1] - 0.1).abs() < 1e-12);
        assert!(LinearClassifier::new(1, 2, cfg(1.0)).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = clf(2);
        assert!(c.learn(&[1.0], 0).is_err());
        assert!(c.learn(&[1.0, 0.0], 2).is_err());
        assert!(LinearClassifier::new(2, 1, ClassifierConfig::default()).is_err());
    }
}
