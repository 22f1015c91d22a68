//! RBM-IM: a trainable, skew-insensitive concept-drift detector for
//! multi-class imbalanced data streams, with baseline detectors, synthetic
//! drifting-stream generators, and a prequential evaluation harness.

pub mod baselines;
pub mod drift;
pub mod error;
pub mod eval;
pub mod gen;
pub mod rbm;
pub mod stream;

pub use error::{Error, Result};
