//! A common batch-level interface over all drift detectors.

use serde::{Deserialize, Serialize};

use crate::baselines::{
    confusion_counts, DdmOci, DdmOciConfig, Fhddm, FhddmConfig, OciLevel, PerfSim, PerfSimConfig,
    PerfSimDecision,
};
use crate::drift::{Decision, DriftLogRecord, RbmImConfig, RbmImDetector};
use crate::error::{Error, Result};
use crate::stream::MiniBatch;

/// What the classifier should do after a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    None,
    Global,
    Classes(Vec<usize>),
}

impl Signal {
    /// Collapses drift records into a signal: any record without a class
    /// makes it global.
    pub fn from_records(records: &[DriftLogRecord]) -> Self {
        let mut classes = Vec::new();
        for r in records.iter().filter(|r| r.decision == Decision::Drift) {
            match r.class {
                None => return Signal::Global,
                Some(c) if !classes.contains(&c) => classes.push(c),
                Some(_) => {}
            }
        }
        if classes.is_empty() {
            Signal::None
        } else {
            classes.sort_unstable();
            Signal::Classes(classes)
        }
    }

    pub fn is_drift(&self) -> bool {
        !matches!(self, Signal::None)
    }
}

pub trait DriftDetector: Send {
    fn name(&self) -> &str;

    /// Sees one labeled batch together with the classifier's predictions
    /// for it. Returns the log records produced by this batch; those with a
    /// drift decision become the batch's [`Signal`].
    fn observe(&mut self, batch: &MiniBatch, predictions: &[usize]) -> Result<Vec<DriftLogRecord>>;
}

fn check_len(batch: &MiniBatch, predictions: &[usize]) -> Result<()> {
    if batch.len() != predictions.len() {
        return Err(Error::Domain(format!(
            "{} predictions for a batch of {}",
            predictions.len(),
            batch.len()
        )));
    }
    Ok(())
}

fn drift_record(name: &str, t: u64, class: Option<usize>, statistic: Option<f64>) -> DriftLogRecord {
    DriftLogRecord {
        t,
        detector: name.to_string(),
        class,
        decision: Decision::Drift,
        statistic,
        p_value: None,
    }
}

/// The RBM-IM detector; warm-started on the first batch it sees.
pub struct RbmImAdapter {
    inner: RbmImDetector,
}

impl RbmImAdapter {
    pub fn new(classes: usize, config: RbmImConfig) -> Result<Self> {
        Ok(Self {
            inner: RbmImDetector::new(classes, config)?,
        })
    }

    pub fn inner(&self) -> &RbmImDetector {
        &self.inner
    }
}

impl DriftDetector for RbmImAdapter {
    fn name(&self) -> &str {
        "rbm-im"
    }

    fn observe(&mut self, batch: &MiniBatch, _predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        if !self.inner.is_warm() {
            self.inner.warm_start(batch)?;
            return Ok(Vec::new());
        }
        let report = self.inner.process_batch(batch)?;
        Ok(DriftLogRecord::from_report(self.name(), &report))
    }
}

pub struct FhddmAdapter {
    inner: Fhddm,
}

impl FhddmAdapter {
    pub fn new(config: FhddmConfig) -> Result<Self> {
        Ok(Self {
            inner: Fhddm::new(config)?,
        })
    }
}

impl DriftDetector for FhddmAdapter {
    fn name(&self) -> &str {
        "fhddm"
    }

    fn observe(&mut self, batch: &MiniBatch, predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        check_len(batch, predictions)?;
        let mut fired = false;
        for (inst, &p) in batch.instances.iter().zip(predictions) {
            fired |= self.inner.update(p == inst.label);
        }
        Ok(if fired {
            vec![drift_record(self.name(), batch.t, None, None)]
        } else {
            Vec::new()
        })
    }
}

pub struct DdmOciAdapter {
    inner: DdmOci,
}

impl DdmOciAdapter {
    pub fn new(classes: usize, config: DdmOciConfig) -> Result<Self> {
        Ok(Self {
            inner: DdmOci::new(classes, config)?,
        })
    }
}

impl DriftDetector for DdmOciAdapter {
    fn name(&self) -> &str {
        "ddm-oci"
    }

    fn observe(&mut self, batch: &MiniBatch, predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        check_len(batch, predictions)?;
        let mut drifted: Vec<usize> = Vec::new();
        for (inst, &p) in batch.instances.iter().zip(predictions) {
            if self.inner.update(p, inst.label)? == OciLevel::Drift && !drifted.contains(&inst.label) {
                drifted.push(inst.label);
            }
        }
        drifted.sort_unstable();
        Ok(drifted
            .into_iter()
            .map(|c| drift_record(self.name(), batch.t, Some(c), None))
            .collect())
    }
}

pub struct PerfSimAdapter {
    inner: PerfSim,
    classes: usize,
}

impl PerfSimAdapter {
    pub fn new(classes: usize, config: PerfSimConfig) -> Result<Self> {
        Ok(Self {
            inner: PerfSim::new(classes, config)?,
            classes,
        })
    }
}

impl DriftDetector for PerfSimAdapter {
    fn name(&self) -> &str {
        "perfsim"
    }

    fn observe(&mut self, batch: &MiniBatch, predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        check_len(batch, predictions)?;
        let pairs = predictions.iter().zip(&batch.instances).map(|(&p, i)| (p, i.label));
        let m = confusion_counts(pairs, self.classes)?;
        Ok(match self.inner.update(&m)? {
            PerfSimDecision::Tested { similarity, drift: true } => {
                // The classifier is about to be reset; windows of the old
                // one say nothing about the next.
                self.inner.reset();
                vec![drift_record(self.name(), batch.t, None, Some(similarity))]
            }
            _ => Vec::new(),
        })
    }
}

/// Fires at fixed batch indices; `classes` restricts the signal to those
/// classes, otherwise it is global.
pub struct OracleDetector {
    at: Vec<u64>,
    classes: Option<Vec<usize>>,
}

impl OracleDetector {
    pub fn new(at: Vec<u64>, classes: Option<Vec<usize>>) -> Self {
        Self { at, classes }
    }
}

impl DriftDetector for OracleDetector {
    fn name(&self) -> &str {
        "oracle"
    }

    fn observe(&mut self, batch: &MiniBatch, _predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        if !self.at.contains(&batch.t) {
            return Ok(Vec::new());
        }
        Ok(match &self.classes {
            None => vec![drift_record(self.name(), batch.t, None, None)],
            Some(cs) => cs
                .iter()
                .map(|&c| drift_record(self.name(), batch.t, Some(c), None))
                .collect(),
        })
    }
}

pub struct NeverDetector;

impl DriftDetector for NeverDetector {
    fn name(&self) -> &str {
        "never"
    }

    fn observe(&mut self, _batch: &MiniBatch, _predictions: &[usize]) -> Result<Vec<DriftLogRecord>> {
        Ok(Vec::new())
    }
}

/// Detector selection in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DetectorSpec {
    RbmIm {
        #[serde(default)]
        config: RbmImConfig,
    },
    Fhddm {
        #[serde(default)]
        config: FhddmConfig,
    },
    DdmOci {
        #[serde(default)]
        config: DdmOciConfig,
    },
    Perfsim {
        #[serde(default)]
        config: PerfSimConfig,
    },
    None,
}

impl DetectorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorSpec::RbmIm { .. } => "rbm-im",
            DetectorSpec::Fhddm { .. } => "fhddm",
            DetectorSpec::DdmOci { .. } => "ddm-oci",
            DetectorSpec::Perfsim { .. } => "perfsim",
            DetectorSpec::None => "none",
        }
    }

    pub fn build(&self, classes: usize) -> Result<Box<dyn DriftDetector>> {
        Ok(match self {
            DetectorSpec::RbmIm { config } => Box::new(RbmImAdapter::new(classes, config.clone())?),
            DetectorSpec::Fhddm { config } => Box::new(FhddmAdapter::new(config.clone())?),
            DetectorSpec::DdmOci { config } => Box::new(DdmOciAdapter::new(classes, config.clone())?),
            DetectorSpec::Perfsim { config } => Box::new(PerfSimAdapter::new(classes, config.clone())?),
            DetectorSpec::None => Box::new(NeverDetector),
        })
    }
}
