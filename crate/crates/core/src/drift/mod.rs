//! Drift detection from per-class RBM reconstruction-error trends.

mod detector;
mod granger;
mod log;
mod reconstruction;
mod trend;

pub use detector::{ClassDecision, Decision, DriftReport, RbmImConfig, RbmImDetector};
pub use granger::{granger_drift_test, granger_f_test, ols_rss, GrangerOutcome};
pub use log::{write_drift_log_csv, write_drift_log_jsonl, DriftLogRecord};
pub use reconstruction::{
    batch_class_error, error_from_parts, reconstruct, reconstruction_error, ReconstructionRecord,
};
pub use trend::{cut_threshold, ClassTrend, TrendConfig, TrendSums, TrendTracker, WindowChange};
