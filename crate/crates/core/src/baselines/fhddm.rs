//! Fast Hoeffding Drift Detection Method.
//!
//! Keeps the last `ω` correctness bits. Once the window is full its accuracy
//! `p` is compared with the best accuracy `p_max` seen since the last reset,
//! and drift is signaled when `p_max − p ≥ ε`, `ε = sqrt(ln(1/δ) / (2ω))`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FhddmConfig {
    pub window: usize,
    pub delta: f64,
}

impl Default for FhddmConfig {
    fn default() -> Self {
        Self {
            window: 25,
            delta: 1e-6,
        }
    }
}

impl FhddmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::Config("fhddm window must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "fhddm delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        fhddm_epsilon(self.window, self.delta)
    }
}

/// `sqrt(ln(1/δ) / (2ω))`.
pub fn fhddm_epsilon(window: usize, delta: f64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * window as f64)).sqrt()
}

#[derive(Debug, Clone)]
pub struct Fhddm {
    config: FhddmConfig,
    epsilon: f64,
    bits: VecDeque<bool>,
    correct: usize,
    p_max: f64,
}

impl Fhddm {
    pub fn new(config: FhddmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            epsilon: config.epsilon(),
            bits: VecDeque::with_capacity(config.window),
            correct: 0,
            p_max: 0.0,
            config,
        })
    }

    pub fn config(&self) -> &FhddmConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn window_len(&self) -> usize {
        self.bits.len()
    }

    /// Windowed accuracy, or `None` until the window is full.
    pub fn accuracy(&self) -> Option<f64> {
        (self.bits.len() == self.config.window)
            .then(|| self.correct as f64 / self.config.window as f64)
    }

    pub fn reset(&mut self) {
        self.bits.clear();
        self.correct = 0;
        self.p_max = 0.0;
    }

    /// Feeds one prediction outcome; returns `true` on drift (and resets).
    pub fn update(&mut self, correct: bool) -> bool {
        if self.bits.len() == self.config.window && self.bits.pop_front() == Some(true) {
            self.correct -= 1;
        }
        self.bits.push_back(correct);
        if correct {
            self.correct += 1;
        }
        self.evaluate()
    }

    /// Compares the current window against `p_max` without adding a bit.
    fn evaluate(&mut self) -> bool {
        let Some(p) = self.accuracy() else {
            return false;
        };
        if p > self.p_max {
            self.p_max = p;
        }
        if self.p_max - p >= self.epsilon {
            self.reset();
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn epsilon_for_defaults() {
        // sqrt(ln(1e6) / 50)
        assert!((FhddmConfig::default().epsilon() - 0.525_652_176_975_693_1).abs() < 1e-12);
    }

    #[test]
    fn all_correct_never_drifts() {
        let mut d = Fhddm::new(FhddmConfig::default()).unwrap();
        for _ in 0..10_000 {
            assert!(!d.update(true));
        }
        assert_eq!(d.p_max(), 1.0);
    }

    #[test]
    fn accuracy_drop_to_forty_percent_drifts() {
        let mut d = Fhddm::new(FhddmConfig::default()).unwrap();
        for _ in 0..25 {
            d.update(true);
        }
        // Replace the window with 10 correct / 15 wrong: p = 0.4.
        let fired = (0..25).any(|i| d.update(i % 5 < 2));
        assert!(fired);
        assert_eq!(d.window_len(), 0);
        assert_eq!(d.p_max(), 0.0);
    }

    #[test]
    fn no_decision_until_window_full() {
        let mut d = Fhddm::new(FhddmConfig::default()).unwrap();
        for _ in 0..24 {
            assert!(!d.update(false));
        }
        assert_eq!(d.accuracy(), None);
    }

    #[test]
    fn config_validation() {
        assert!(Fhddm::new(FhddmConfig { window: 0, ..Default::default() }).is_err());
        assert!(Fhddm::new(FhddmConfig { delta: 1.0, ..Default::default() }).is_err());
    }

    fn with_window(bits: &[bool], p_max: f64) -> Fhddm {
        let mut d = Fhddm::new(FhddmConfig {
            window: bits.len(),
            ..Default::default()
        })
        .unwrap();
        d.bits = bits.iter().copied().collect();
        d.correct = bits.iter().filter(|&&b| b).count();
        d.p_max = p_max;
        d
    }

    proptest! {
        #[test]
        fn decision_depends_on_window_mean_only(
            bits in proptest::collection::vec(any::<bool>(), 1..60),
            p_max in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = bits.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = with_window(&bits, p_max).evaluate();
            let b = with_window(&shuffled, p_max).evaluate();
            prop_assert_eq!(a, b);
        }
    }
}
