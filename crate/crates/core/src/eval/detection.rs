//! Scoring detections against known drift points.

use serde::{Deserialize, Serialize};

use super::detectors::Signal;

pub const DEFAULT_HORIZON: u64 = 50;

/// A true drift starting at batch `batch` on `classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub batch: u64,
    pub classes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionCounts {
    pub drifts: usize,
    pub hits: usize,
    pub delays: Vec<u64>,
    pub false_alarms: usize,
    pub batches: u64,
    /// Class flags raised inside detection horizons, and how many of them
    /// named an affected class.
    pub flagged: usize,
    pub flagged_correct: usize,
    /// Affected classes over all drifts, and how many were flagged at least
    /// once inside their horizon.
    pub affected: usize,
    pub affected_found: usize,
}

impl DetectionCounts {
    pub fn merge(&mut self, other: &DetectionCounts) {
        self.drifts += other.drifts;
        self.hits += other.hits;
        self.delays.extend_from_slice(&other.delays);
        self.false_alarms += other.false_alarms;
        self.batches += other.batches;
        self.flagged += other.flagged;
        self.flagged_correct += other.flagged_correct;
        self.affected += other.affected;
        self.affected_found += other.affected_found;
    }

    pub fn summary(&self) -> DetectionMetrics {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        DetectionMetrics {
            mean_delay: (!self.delays.is_empty())
                .then(|| self.delays.iter().sum::<u64>() as f64 / self.delays.len() as f64),
            false_alarms_per_100: if self.batches > 0 {
                100.0 * self.false_alarms as f64 / self.batches as f64
            } else {
                0.0
            },
            miss_rate: ratio(self.drifts - self.hits, self.drifts),
            attribution_precision: ratio(self.flagged_correct, self.flagged),
            attribution_recall: if self.flagged > 0 {
                ratio(self.affected_found, self.affected)
            } else {
                None
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub mean_delay: Option<f64>,
    pub false_alarms_per_100: f64,
    pub miss_rate: Option<f64>,
    /// `None` when the detector never attributed drift to classes.
    pub attribution_precision: Option<f64>,
    pub attribution_recall: Option<f64>,
}

/// Matches `detections` (batch, signal) against `truth`. The horizon of a
/// drift point spans `horizon` batches from its start, cut short by the
/// next drift point. The first detection inside a horizon is a hit; every
/// detection outside all horizons is a false alarm.
pub fn detection_counts(
    detections: &[(u64, Signal)],
    truth: &[DriftPoint],
    horizon: u64,
    batches: u64,
) -> DetectionCounts {
    let mut truth: Vec<&DriftPoint> = truth.iter().collect();
    truth.sort_by_key(|d| d.batch);
    let spans: Vec<(u64, u64)> = truth
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let end = d.batch.saturating_add(horizon);
            let end = truth.get(i + 1).map_or(end, |n| end.min(n.batch));
            (d.batch, end)
        })
        .collect();
    let mut c = DetectionCounts {
        drifts: truth.len(),
        batches,
        ..Default::default()
    };
    for (d, &(start, end)) in truth.iter().zip(&spans) {
        c.affected += d.classes.len();
        let inside: Vec<&(u64, Signal)> = detections
            .iter()
            .filter(|(t, s)| *t >= start && *t < end && s.is_drift())
            .collect();
        if let Some((t, _)) = inside.first() {
            c.hits += 1;
            c.delays.push(t - start);
        }
        let mut found = vec![false; d.classes.len()];
        for (_, s) in &inside {
            if let Signal::Classes(cs) = s {
                for m in cs {
                    c.flagged += 1;
                    if let Some(k) = d.classes.iter().position(|x| x == m) {
                        c.flagged_correct += 1;
                        found[k] = true;
                    }
                }
            }
        }
        c.affected_found += found.iter().filter(|&&f| f).count();
    }
    c.false_alarms = detections
        .iter()
        .filter(|(t, s)| s.is_drift() && !spans.iter().any(|&(a, b)| *t >= a && *t < b))
        .count();
    c
}

pub fn detection_metrics(
    detections: &[(u64, Signal)],
    truth: &[DriftPoint],
    horizon: u64,
    batches: u64,
) -> DetectionMetrics {
    detection_counts(detections, truth, horizon, batches).summary()
}
