use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbm::RbmParameters;
use crate::stream::{Instance, MiniBatch};

/// Mean-field reconstruction `(x̃, ỹ)` of an instance: `h = P(h | x, 1_y)`,
/// `x̃ = P(v | h)`, `ỹ = P(z | h)`.
pub fn reconstruct(instance: &Instance, p: &RbmParameters) -> Result<(Vec<f64>, Vec<f64>)> {
    let z = crate::stream::one_hot(instance.label, p.classes())?;
    let h = p.hidden_activation(&instance.features, &z)?;
    Ok((p.visible_activation(&h)?, p.class_activation(&h)?))
}

/// Euclidean distance between `(x, 1_y)` and its reconstruction.
pub fn error_from_parts(x: &[f64], x_rec: &[f64], label: usize, y_rec: &[f64]) -> f64 {
    let feat: f64 = x.iter().zip(x_rec).map(|(a, b)| (a - b).powi(2)).sum();
    let cls: f64 = y_rec
        .iter()
        .enumerate()
        .map(|(k, &y)| {
            let target = if k == label { 1.0 } else { 0.0 };
            (target - y).powi(2)
        })
        .sum();
    (feat + cls).sqrt()
}

pub fn reconstruction_error(instance: &Instance, p: &RbmParameters) -> Result<f64> {
    let (x_rec, y_rec) = reconstruct(instance, p)?;
    Ok(error_from_parts(
        &instance.features,
        &x_rec,
        instance.label,
        &y_rec,
    ))
}

/// Per-class mean reconstruction error of one batch. Absent classes are
/// `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub t: u64,
    pub per_class_error: Vec<Option<f64>>,
    pub presence: Vec<usize>,
}

impl ReconstructionRecord {
    pub fn present_classes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.per_class_error
            .iter()
            .enumerate()
            .filter_map(|(m, e)| e.map(|e| (m, e)))
    }
}

pub fn batch_class_error(batch: &MiniBatch, p: &RbmParameters) -> Result<ReconstructionRecord> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let classes = p.classes();
    let mut per_class: Vec<Vec<f64>> = vec![Vec::new(); classes];
    for inst in &batch.instances {
        let e = reconstruction_error(inst, p)?;
        per_class[inst.label].push(e);
    }
    let presence = per_class.iter().map(Vec::len).collect();
    let per_class_error = per_class
        .into_iter()
        .map(|mut errs| {
            if errs.is_empty() {
                return None;
            }
            // Summation order fixed by value so the record does not depend
            // on instance order within the batch.
            errs.sort_by(f64::total_cmp);
            Some(errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect();
    Ok(ReconstructionRecord {
        t: batch.t,
        per_class_error,
        presence,
    })
}
