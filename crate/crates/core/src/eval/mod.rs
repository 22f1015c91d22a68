//! Prequential evaluation of a base classifier with drift detectors.

mod classifier;
mod detection;
mod detectors;
mod metrics;
mod prequential;
mod report;

pub use classifier::{argmax, ClassifierConfig, LinearClassifier};
pub use detection::{
    detection_counts, detection_metrics, DetectionCounts, DetectionMetrics, DriftPoint, DEFAULT_HORIZON,
};
pub use detectors::{
    DdmOciAdapter, DetectorSpec, DriftDetector, FhddmAdapter, NeverDetector, OracleDetector, PerfSimAdapter,
    RbmImAdapter, Signal,
};
pub use metrics::{
    class_recalls, geometric_mean, pm_auc, pm_gm, Outcome, PrequentialWindow, DEFAULT_WINDOW,
};
pub use prequential::{run_prequential, MetricRow, PrequentialConfig, PrequentialResult};
pub use report::{write_metrics_csv, write_summary_json, RunSummary};

use crate::gen::StreamGenerator;

/// True drift points of a generated stream for batches of `batch_size`.
pub fn drift_points(stream: &StreamGenerator, batch_size: usize) -> Vec<DriftPoint> {
    stream
        .drift_batches(batch_size)
        .into_iter()
        .map(|batch| DriftPoint {
            batch,
            classes: stream.drift_schedule().affected_classes.clone(),
        })
        .collect()
}
