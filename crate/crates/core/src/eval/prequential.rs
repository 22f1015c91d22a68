//! Test-then-train evaluation loop.

use serde::{Deserialize, Serialize};

use super::classifier::{ClassifierConfig, LinearClassifier};
use super::detectors::{DriftDetector, Signal};
use super::metrics::{pm_auc, pm_gm, Outcome, PrequentialWindow, DEFAULT_WINDOW};
use crate::drift::DriftLogRecord;
use crate::error::{Error, Result};
use crate::stream::MiniBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrequentialConfig {
    pub window: usize,
    pub classifier: ClassifierConfig,
    /// Reset only the flagged classes on class-level signals instead of the
    /// whole classifier.
    pub per_class_reset: bool,
}

impl Default for PrequentialConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            classifier: ClassifierConfig::default(),
            per_class_reset: true,
        }
    }
}

/// Metrics after one batch. Undefined metrics are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub batch: u64,
    pub pm_auc: Option<f64>,
    pub pm_gm: Option<f64>,
    pub signal: Signal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrequentialResult {
    pub rows: Vec<MetricRow>,
    pub records: Vec<DriftLogRecord>,
    pub instances: u64,
}

impl PrequentialResult {
    /// Batches at which the detector signaled drift.
    pub fn detections(&self) -> Vec<(u64, Signal)> {
        self.rows
            .iter()
            .filter(|r| r.signal.is_drift())
            .map(|r| (r.batch, r.signal.clone()))
            .collect()
    }

    fn mean_of(&self, from: u64, to: u64, f: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.batch >= from && r.batch < to)
            .filter_map(f)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Mean pmAUC over batches `from..to` where it is defined.
    pub fn mean_pm_auc(&self, from: u64, to: u64) -> Option<f64> {
        self.mean_of(from, to, |r| r.pm_auc)
    }

    pub fn mean_pm_gm(&self, from: u64, to: u64) -> Option<f64> {
        self.mean_of(from, to, |r| r.pm_gm)
    }
}

/// Runs test-then-train over `batches`: every instance is scored and
/// recorded before the classifier learns from it, then the detector sees
/// the whole batch and its signal resets the classifier.
pub fn run_prequential<I>(
    batches: I,
    classes: usize,
    mut detector: Option<&mut dyn DriftDetector>,
    config: &PrequentialConfig,
) -> Result<PrequentialResult>
where
    I: IntoIterator<Item = Result<MiniBatch>>,
{
    let mut window = PrequentialWindow::new(classes, config.window)?;
    let mut clf: Option<LinearClassifier> = None;
    let mut out = PrequentialResult::default();
    let mut preds = Vec::new();
    for batch in batches {
        let batch = batch?;
        if batch.is_empty() {
            continue;
        }
        let c = match &mut clf {
            Some(c) => c,
            None => clf.insert(LinearClassifier::new(batch.dim(), classes, config.classifier.clone())?),
        };
        preds.clear();
        for inst in &batch.instances {
            if inst.label >= classes {
                return Err(Error::Domain(format!(
                    "label {} out of range for {classes} classes",
                    inst.label
                )));
            }
            let scores = c.scores(&inst.features)?;
            let predicted = super::classifier::argmax(&scores);
            window.push(Outcome {
                scores,
                label: inst.label,
                predicted,
            })?;
            preds.push(predicted);
            c.learn(&inst.features, inst.label)?;
        }
        out.instances += batch.len() as u64;

        let signal = match detector.as_deref_mut() {
            Some(d) => {
                let records = d.observe(&batch, &preds)?;
                let s = Signal::from_records(&records);
                out.records.extend(records);
                s
            }
            None => Signal::None,
        };
        match &signal {
            Signal::None => {}
            Signal::Classes(cs) if config.per_class_reset => cs.iter().for_each(|&m| c.reset_class(m)),
            _ => c.reset(),
        }
        out.rows.push(MetricRow {
            batch: batch.t,
            pm_auc: pm_auc(&window).ok(),
            pm_gm: pm_gm(&window).ok(),
            signal,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::detectors::{NeverDetector, OracleDetector};
    use crate::gen::{DriftConfig, DriftKind, GeneratorConfig};

    fn stream(seed: u64) -> crate::gen::StreamGenerator {
        GeneratorConfig {
            classes: 3,
            dim: 6,
            length: 6000,
            seed,
            ir: 5.0,
            drift: DriftConfig {
                kind: DriftKind::Sudden,
                t1: 3000,
                t2: 3000,
                ..Default::default()
            },
            ..Default::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn never_detector_equals_no_detector() {
        let cfg = PrequentialConfig::default();
        let a = run_prequential(stream(1).batches(50), 3, None, &cfg).unwrap();
        let mut never = NeverDetector;
        let b = run_prequential(stream(1).batches(50), 3, Some(&mut never), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 120);
        assert_eq!(a.instances, 6000);
        assert!(a.detections().is_empty());
    }

    #[test]
    fn metrics_are_in_range() {
        let r = run_prequential(stream(2).batches(50), 3, None, &PrequentialConfig::default()).unwrap();
        for row in &r.rows {
            for v in [row.pm_auc, row.pm_gm].into_iter().flatten() {
                assert!((0.0..=1.0).contains(&v), "{row:?}");
            }
        }
        // The classifier learns something before the drift.
        assert!(r.mean_pm_auc(40, 60).unwrap() > 0.6);
    }

    #[test]
    fn oracle_reset_is_recorded() {
        let mut oracle = OracleDetector::new(vec![60], None);
        let r = run_prequential(stream(3).batches(50), 3, Some(&mut oracle), &PrequentialConfig::default()).unwrap();
        assert_eq!(r.detections(), vec![(60, Signal::Global)]);
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn bad_labels_are_rejected() {
        let r = run_prequential(stream(4).batches(50), 2, None, &PrequentialConfig::default());
        assert!(r.is_err());
    }
}
