//! CSV and JSON output of evaluation runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::detection::{DetectionCounts, DetectionMetrics};
use super::detectors::Signal;
use super::prequential::{MetricRow, PrequentialResult};
use crate::error::Result;

fn signal_cell(s: &Signal) -> String {
    match s {
        Signal::None => String::new(),
        Signal::Global => "global".into(),
        Signal::Classes(cs) => cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
    }
}

/// One row per batch: `batch,pm_auc,pm_gm,<detector>`. Undefined metrics
/// are empty cells; the detector column holds `global`, the flagged
/// classes joined by `;`, or nothing.
pub fn write_metrics_csv<W: Write>(out: W, detector: &str, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["batch", "pm_auc", "pm_gm", detector])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([r.batch.to_string(), opt(r.pm_auc), opt(r.pm_gm), signal_cell(&r.signal)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub detector: String,
    pub seed: u64,
    pub batches: u64,
    pub instances: u64,
    pub mean_pm_auc: Option<f64>,
    pub mean_pm_gm: Option<f64>,
    pub detections: usize,
    pub counts: DetectionCounts,
    pub metrics: DetectionMetrics,
}

impl RunSummary {
    pub fn new(detector: &str, seed: u64, result: &PrequentialResult, counts: DetectionCounts) -> Self {
        Self {
            detector: detector.to_string(),
            seed,
            batches: result.rows.len() as u64,
            instances: result.instances,
            mean_pm_auc: result.mean_pm_auc(0, u64::MAX),
            mean_pm_gm: result.mean_pm_gm(0, u64::MAX),
            detections: result.detections().len(),
            metrics: counts.summary(),
            counts,
        }
    }
}

pub fn write_summary_json<W: Write, T: Serialize>(mut out: W, summary: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary)?;
    out.write_all(b"\n")?;
    Ok(())
}
