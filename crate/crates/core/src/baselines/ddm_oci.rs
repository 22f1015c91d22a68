//! Drift Detection Method for Online Class Imbalance.
//!
//! Every class keeps a time-decayed recall `r = S / N` with
//! `S ← θ·S + hit`, `N ← θ·N + 1`, updated only by instances of that class.
//! With `s = sqrt(r(1 − r) / N)`, the best `r + s` seen since the class was
//! last reset is remembered as `(r_max, s_max)`; the class drifts when
//! `r + s < r_max · α_d` and is in warning when `r + s < r_max · α_w`.
//! Neither the best value nor the test is taken before a class has seen
//! `min_errors` misses since its reset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdmOciConfig {
    /// Recall decay `θ_r`.
    pub decay: f64,
    pub warning: f64,
    pub drift: f64,
    pub min_errors: usize,
}

impl Default for DdmOciConfig {
    fn default() -> Self {
        Self {
            decay: 0.99,
            warning: 0.95,
            drift: 0.9,
            min_errors: 10,
        }
    }
}

impl DdmOciConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!(
                "ddm-oci decay must be in (0, 1), got {}",
                self.decay
            )));
        }
        if !(self.drift > 0.0 && self.drift <= self.warning && self.warning <= 1.0) {
            return Err(Error::Config(format!(
                "ddm-oci thresholds must satisfy 0 < drift ({}) <= warning ({}) <= 1",
                self.drift, self.warning
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OciLevel {
    Stable,
    Warning,
    Drift,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassRecall {
    pub hits: f64,
    pub weight: f64,
    pub misses: usize,
    pub r_max: f64,
    pub s_max: f64,
}

impl ClassRecall {
    pub fn recall(&self) -> Option<f64> {
        (self.weight > 0.0).then(|| self.hits / self.weight)
    }

    pub fn sd(&self) -> Option<f64> {
        self.recall().map(|r| (r * (1.0 - r) / self.weight).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct DdmOci {
    config: DdmOciConfig,
    classes: Vec<ClassRecall>,
}

impl DdmOci {
    pub fn new(classes: usize, config: DdmOciConfig) -> Result<Self> {
        config.validate()?;
        if classes < 1 {
            return Err(Error::Config("ddm-oci needs at least one class".into()));
        }
        Ok(Self {
            config,
            classes: vec![ClassRecall::default(); classes],
        })
    }

    pub fn config(&self) -> &DdmOciConfig {
        &self.config
    }

    pub fn class(&self, m: usize) -> &ClassRecall {
        &self.classes[m]
    }

    pub fn reset_class(&mut self, m: usize) {
        self.classes[m] = ClassRecall::default();
    }

    pub fn reset(&mut self) {
        self.classes.fill(ClassRecall::default());
    }

    /// Feeds one prediction. Only the class of `actual` changes, so the
    /// returned level refers to that class. A drifted class is reset.
    pub fn update(&mut self, predicted: usize, actual: usize) -> Result<OciLevel> {
        let z = self.classes.len();
        if actual >= z || predicted >= z {
            return Err(Error::Domain(format!(
                "label {actual} or prediction {predicted} out of range for {z} classes"
            )));
        }
        let theta = self.config.decay;
        let c = &mut self.classes[actual];
        let hit = predicted == actual;
        c.hits = theta * c.hits + if hit { 1.0 } else { 0.0 };
        c.weight = theta * c.weight + 1.0;
        if !hit {
            c.misses += 1;
        }
        let r = c.hits / c.weight;
        let s = (r * (1.0 - r) / c.weight).sqrt();
        if c.misses < self.config.min_errors {
            return Ok(OciLevel::Stable);
        }
        if r + s > c.r_max + c.s_max {
            c.r_max = r;
            c.s_max = s;
        }
        let level = if r + s < c.r_max * self.config.drift {
            OciLevel::Drift
        } else if r + s < c.r_max * self.config.warning {
            OciLevel::Warning
        } else {
            OciLevel::Stable
        };
        if level == OciLevel::Drift {
            self.reset_class(actual);
        }
        Ok(level)
    }
}
