//! Reference detectors driven by the base classifier's predictions.

mod ddm_oci;
mod fhddm;
mod perfsim;

pub use ddm_oci::{ClassRecall, DdmOci, DdmOciConfig, OciLevel};
pub use fhddm::{fhddm_epsilon, Fhddm, FhddmConfig};
pub use perfsim::{confusion_counts, confusion_similarity, PerfSim, PerfSimConfig, PerfSimDecision};
