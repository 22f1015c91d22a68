use std::io::Write;

use serde::{Deserialize, Serialize};

use super::detector::{Decision, DriftReport};
use crate::error::Result;

/// One drift-log line. `class` is `None` for detectors that only report
/// global drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftLogRecord {
    pub t: u64,
    pub detector: String,
    pub class: Option<usize>,
    pub decision: Decision,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

impl DriftLogRecord {
    /// Records for every tested or drifting class of a report.
    pub fn from_report(detector: &str, report: &DriftReport) -> Vec<Self> {
        report
            .decisions
            .iter()
            .filter(|d| d.decision == Decision::Drift || report.classes_tested.contains(&d.class))
            .map(|d| Self {
                t: report.t,
                detector: detector.to_string(),
                class: Some(d.class),
                decision: d.decision,
                statistic: d.statistic,
                p_value: d.p_value,
            })
            .collect()
    }
}

pub fn write_drift_log_csv<W: Write>(out: W, records: &[DriftLogRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "detector", "class", "decision", "statistic", "p_value"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.detector.clone(),
            r.class.map(|c| c.to_string()).unwrap_or_else(|| "global".into()),
            match r.decision {
                Decision::Stable => "stable".into(),
                Decision::Drift => "drift".into(),
            },
            opt(r.statistic),
            opt(r.p_value),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_drift_log_jsonl<W: Write>(mut out: W, records: &[DriftLogRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::ClassDecision;

    fn report() -> DriftReport {
        DriftReport {
            t: 7,
            decisions: vec![
                ClassDecision { class: 0, decision: Decision::Stable, statistic: Some(3.5), p_value: Some(0.01) },
                ClassDecision { class: 1, decision: Decision::Stable, statistic: None, p_value: None },
                ClassDecision { class: 2, decision: Decision::Drift, statistic: Some(0.25), p_value: Some(0.5) },
            ],
            classes_tested: vec![0, 2],
        }
    }

    #[test]
    fn csv_layout() {
        let recs = DriftLogRecord::from_report("rbm-im", &report());
        assert_eq!(recs.len(), 2);
        let mut buf = Vec::new();
        write_drift_log_csv(&mut buf, &recs).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,detector,class,decision,statistic,p_value\n\
             7,rbm-im,0,stable,3.5,0.01\n\
             7,rbm-im,2,drift,0.25,0.5\n"
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = DriftLogRecord::from_report("rbm-im", &report());
        let mut buf = Vec::new();
        write_drift_log_jsonl(&mut buf, &recs).unwrap();
        let back: Vec<DriftLogRecord> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(back, recs);
    }
}
