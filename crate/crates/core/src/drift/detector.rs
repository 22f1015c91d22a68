use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::granger::{granger_drift_test, GrangerOutcome};
use super::reconstruction::{batch_class_error, ReconstructionRecord};
use super::trend::{TrendConfig, TrendTracker, WindowChange};
use crate::error::{Error, Result};
use crate::rbm::{init_parameters, train_batch, ClassBalanceState, RbmHyperparams, RbmParameters};
use crate::stream::{ClassStats, MiniBatch, StreamSchema, DEFAULT_DECAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmImConfig {
    pub rbm: RbmHyperparams,
    pub trend: TrendConfig,
    /// Epochs over the first batch during warm start.
    pub warm_epochs: usize,
    /// Training passes over every monitored batch.
    pub train_epochs: usize,
    pub granger_lag: usize,
    pub alpha: f64,
    /// Length of the slope series fed to the causality test; defaults to
    /// `2 · max(8, 2·(lag + 2))`.
    pub series_len: Option<usize>,
    /// Per-instance decay of the class counts behind the balance weights.
    pub decay: f64,
    /// A significant error increase keeps a class armed for this many of
    /// its subsequent updates; the causality test only signals drift on
    /// armed classes.
    pub arm_updates: usize,
    /// Smallest relative rise of the mean error that can arm a class.
    pub min_increase: f64,
}

impl Default for RbmImConfig {
    fn default() -> Self {
        Self {
            rbm: RbmHyperparams::default(),
            trend: TrendConfig::default(),
            warm_epochs: 20,
            train_epochs: 10,
            granger_lag: 1,
            alpha: 0.05,
            series_len: None,
            decay: DEFAULT_DECAY,
            arm_updates: 10,
            min_increase: 0.05,
        }
    }
}

impl RbmImConfig {
    pub fn series_len(&self) -> usize {
        self.series_len
            .unwrap_or(2 * 8usize.max(2 * (self.granger_lag + 2)))
    }

    pub fn validate(&self) -> Result<()> {
        self.rbm.validate()?;
        self.trend.validate()?;
        if self.granger_lag == 0 {
            return Err(Error::Config("granger lag must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.series_len() < 2 * (self.granger_lag + 2) {
            return Err(Error::Config(format!(
                "series length {} too short for lag {}",
                self.series_len(),
                self.granger_lag
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Config(format!("decay {} outside (0, 1]", self.decay)));
        }
        if !(self.min_increase >= 0.0 && self.min_increase.is_finite()) {
            return Err(Error::Config("min_increase must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Stable,
    Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDecision {
    pub class: usize,
    pub decision: Decision,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub t: u64,
    /// One entry per class, indexed by class id.
    pub decisions: Vec<ClassDecision>,
    pub classes_tested: Vec<usize>,
}

impl DriftReport {
    pub fn drifted_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.decisions
            .iter()
            .filter(|d| d.decision == Decision::Drift)
            .map(|d| d.class)
    }

    pub fn any_drift(&self) -> bool {
        self.drifted_classes().next().is_some()
    }
}

#[derive(Debug, Clone)]
struct Model {
    schema: StreamSchema,
    params: RbmParameters,
}

/// The RBM-IM detector: a continuously trained RBM whose per-class
/// reconstruction-error trends are monitored for drift.
#[derive(Debug, Clone)]
pub struct RbmImDetector {
    config: RbmImConfig,
    classes: usize,
    model: Option<Model>,
    stats: ClassStats,
    balance: ClassBalanceState,
    tracker: TrendTracker,
    armed: Vec<usize>,
    rng: ChaCha8Rng,
    last_record: Option<ReconstructionRecord>,
}

impl RbmImDetector {
    pub fn new(classes: usize, config: RbmImConfig) -> Result<Self> {
        config.validate()?;
        if classes < 2 {
            return Err(Error::Config("class count must be >= 2".into()));
        }
        Ok(Self {
            stats: ClassStats::new(classes, config.decay)?,
            balance: ClassBalanceState::new(classes, config.rbm.beta)?,
            tracker: TrendTracker::new(classes, config.trend.clone(), config.series_len())?,
            armed: vec![0; classes],
            rng: ChaCha8Rng::seed_from_u64(config.rbm.seed),
            model: None,
            last_record: None,
            classes,
            config,
        })
    }

    pub fn config(&self) -> &RbmImConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn is_warm(&self) -> bool {
        self.model.is_some()
    }

    pub fn schema(&self) -> Option<&StreamSchema> {
        self.model.as_ref().map(|m| &m.schema)
    }

    pub fn parameters(&self) -> Option<&RbmParameters> {
        self.model.as_ref().map(|m| &m.params)
    }

    pub fn tracker(&self) -> &TrendTracker {
        &self.tracker
    }

    pub fn balance(&self) -> &ClassBalanceState {
        &self.balance
    }

    /// Per-class errors of the last processed batch, measured before the
    /// RBM trained on it.
    pub fn last_record(&self) -> Option<&ReconstructionRecord> {
        self.last_record.as_ref()
    }

    /// Fixes normalization from `batch`, initializes the RBM and trains it
    /// for `warm_epochs` passes over the batch.
    pub fn warm_start(&mut self, batch: &MiniBatch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Setup("warm start needs a non-empty batch".into()));
        }
        let schema = StreamSchema::fit(batch, self.classes)
            .map_err(|e| Error::Setup(format!("cannot fit schema: {e}")))?;
        let norm = schema.normalize_batch(batch)?;
        let mut params = init_parameters(&schema, &self.config.rbm, &mut self.rng);
        for inst in &norm.instances {
            self.stats.update(inst.label)?;
        }
        self.balance.sync(&self.stats);
        for _ in 0..self.config.warm_epochs {
            train_batch(&mut params, &norm, &self.config.rbm, &self.balance, &mut self.rng)?;
        }
        self.model = Some(Model { schema, params });
        Ok(())
    }

    /// Mean reconstruction error of `batch` under the current RBM, without
    /// any state change.
    pub fn mean_error(&self, batch: &MiniBatch) -> Result<f64> {
        let model = self.warm_model()?;
        let norm = model.schema.normalize_batch(batch)?;
        let total: f64 = norm
            .instances
            .iter()
            .map(|i| super::reconstruction::reconstruction_error(i, &model.params))
            .sum::<Result<f64>>()?;
        Ok(total / norm.len() as f64)
    }

    fn warm_model(&self) -> Result<&Model> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Setup("detector has not been warm-started".into()))
    }

    /// Tests the batch for drift, then trains the RBM on it.
    pub fn process_batch(&mut self, batch: &MiniBatch) -> Result<DriftReport> {
        let model = self.warm_model()?;
        let norm = model.schema.normalize_batch(batch)?;
        if let Some(bad) = norm.instances.iter().find(|i| i.label >= self.classes) {
            return Err(Error::Domain(format!(
                "label {} out of range for {} classes",
                bad.label, self.classes
            )));
        }
        let record = batch_class_error(&norm, &model.params)?;

        let mut decisions: Vec<ClassDecision> = (0..self.classes)
            .map(|class| ClassDecision {
                class,
                decision: Decision::Stable,
                statistic: None,
                p_value: None,
            })
            .collect();
        let mut tested = Vec::new();
        for (m, r) in record.present_classes() {
            self.tracker.update_trend(m, record.t, r)?;
            let change = self.tracker.adaptive_window(m)?;
            match change {
                WindowChange::Shrunk { old_mean, new_mean, .. }
                    if new_mean > old_mean * (1.0 + self.config.min_increase) =>
                {
                    self.armed[m] = self.config.arm_updates;
                }
                WindowChange::Shrunk { .. } => self.armed[m] = 0,
                _ => {}
            }
            if let Some(q) = self.tracker.trend_slope(m) {
                self.tracker.push_slope(m, q);
            }
            if !self.tracker.series_full(m) {
                self.armed[m] = self.armed[m].saturating_sub(1);
                continue;
            }
            let outcome = granger_drift_test(
                &self.tracker.trend_series(m),
                self.config.granger_lag,
                self.config.alpha,
            )?;
            if let GrangerOutcome::Tested {
                statistic,
                p_value,
                drift,
            } = outcome
            {
                tested.push(m);
                let d = &mut decisions[m];
                d.statistic = Some(statistic);
                d.p_value = Some(p_value);
                if drift && self.armed[m] > 0 {
                    d.decision = Decision::Drift;
                    self.tracker.reset_class(m);
                    self.armed[m] = 0;
                    continue;
                }
            }
            self.armed[m] = self.armed[m].saturating_sub(1);
        }

        for inst in &norm.instances {
            self.stats.update(inst.label)?;
        }
        self.balance.sync(&self.stats);
        let model = self.model.as_mut().expect("checked above");
        for _ in 0..self.config.train_epochs {
            train_batch(
                &mut model.params,
                &norm,
                &self.config.rbm,
                &self.balance,
                &mut self.rng,
            )?;
        }
        self.last_record = Some(record);
        Ok(DriftReport {
            t: batch.t,
            decisions,
            classes_tested: tested,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Instance;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blob_batch(t: u64, rng: &mut ChaCha8Rng, centers: &[[f64; 4]], labels: &[usize]) -> MiniBatch {
        let noise = Normal::new(0.0, 0.05).unwrap();
        let instances = (0..50)
            .map(|j| {
                let y = labels[rng.random_range(0..labels.len())];
                let x = centers[y].iter().map(|c| c + noise.sample(rng)).collect();
                Instance::new(x, y, t * 50 + j)
            })
            .collect();
        MiniBatch::new(t, instances).unwrap()
    }

    const CENTERS: [[f64; 4]; 3] = [
        [0.1, 0.9, 0.1, 0.9],
        [0.9, 0.1, 0.9, 0.1],
        [0.5, 0.5, 0.9, 0.9],
    ];

    #[test]
    fn process_before_warm_start_fails() {
        let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2]);
        assert!(matches!(det.process_batch(&b), Err(Error::Setup(_))));
    }

    #[test]
    fn empty_batch_rejected() {
        let e = MiniBatch::new(0, vec![]);
        assert!(e.is_err());
        assert!(RbmImDetector::new(1, RbmImConfig::default()).is_err());
    }

    #[test]
    fn warm_start_beats_random_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2]);
        let mut cold = RbmImDetector::new(3, RbmImConfig { warm_epochs: 0, ..Default::default() }).unwrap();
        cold.warm_start(&b).unwrap();
        let mut warm = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
        warm.warm_start(&b).unwrap();
        assert!(warm.mean_error(&b).unwrap() < cold.mean_error(&b).unwrap());
    }

    #[test]
    fn deterministic_under_seed() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
            det.warm_start(&blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2])).unwrap();
            let mut reports = Vec::new();
            for t in 1..30 {
                reports.push(det.process_batch(&blob_batch(t, &mut rng, &CENTERS, &[0, 1, 2])).unwrap());
            }
            (reports, det.parameters().unwrap().clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_class_batch_advances_only_that_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
        det.warm_start(&blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2])).unwrap();
        det.process_batch(&blob_batch(1, &mut rng, &CENTERS, &[1])).unwrap();
        assert_eq!(det.tracker().class(1).effective_count(), 1);
        assert_eq!(det.tracker().class(0).effective_count(), 0);
        assert_eq!(det.tracker().class(2).effective_count(), 0);
        let rec = det.last_record().unwrap();
        assert_eq!(rec.per_class_error[0], None);
        assert!(rec.per_class_error[1].is_some());
    }

    #[test]
    fn repeated_batch_index_is_a_sequencing_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
        det.warm_start(&blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2])).unwrap();
        det.process_batch(&blob_batch(4, &mut rng, &CENTERS, &[0])).unwrap();
        let err = det.process_batch(&blob_batch(4, &mut rng, &CENTERS, &[0])).unwrap_err();
        assert!(matches!(err, Error::Sequencing { class: 0, t: 4, last: 4 }));
    }

    #[test]
    fn class_shift_is_flagged_on_that_class() {
        // Class 2 moves at batch 60. A run is a hit when class 2 is flagged
        // within 20 batches and clean when no other class is flagged then.
        let (mut hits, mut clean) = (0, 0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
            det.warm_start(&blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2])).unwrap();
            let mut shifted = CENTERS;
            shifted[2] = [0.9, 0.9, 0.1, 0.1];
            let (mut flagged, mut other) = (false, false);
            for t in 1..80 {
                let c = if t < 60 { &CENTERS } else { &shifted };
                let rep = det.process_batch(&blob_batch(t, &mut rng, c, &[0, 1, 2])).unwrap();
                for m in rep.drifted_classes().filter(|_| t >= 60) {
                    if m == 2 {
                        flagged = true;
                    } else {
                        other = true;
                    }
                }
            }
            hits += flagged as usize;
            clean += !other as usize;
        }
        assert!(hits >= 16, "hits {hits}/20");
        assert!(clean >= 16, "clean {clean}/20");
    }

    #[test]
    fn drift_implies_tested() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut det = RbmImDetector::new(3, RbmImConfig::default()).unwrap();
        det.warm_start(&blob_batch(0, &mut rng, &CENTERS, &[0, 1, 2])).unwrap();
        let mut shifted = CENTERS;
        shifted[0] = [0.9, 0.9, 0.9, 0.9];
        for t in 1..100 {
            let c = if t < 50 { &CENTERS } else { &shifted };
            let rep = det.process_batch(&blob_batch(t, &mut rng, c, &[0, 1, 2])).unwrap();
            for m in rep.drifted_classes() {
                assert!(rep.classes_tested.contains(&m));
                assert!(rep.decisions[m].p_value.unwrap() > 0.05);
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad = RbmImConfig { alpha: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = RbmImConfig { series_len: Some(4), ..Default::default() };
        assert!(bad.validate().is_err());
        assert_eq!(RbmImConfig::default().series_len(), 16);
        assert_eq!(RbmImConfig { granger_lag: 5, ..Default::default() }.series_len(), 28);
    }
}
