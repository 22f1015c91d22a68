//! Stream data model: instances, mini-batches, schemas, and per-class counts.
//!
//! Features are min-max normalized into `[0, 1]` using ranges fixed once from
//! the warm-up batch, so the visible-layer encoding stays stationary for the
//! lifetime of a detector.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: usize,
    pub seq: u64,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: usize, seq: u64) -> Self {
        Self {
            features,
            label,
            seq,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// A timestamped, non-empty block of instances sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub t: u64,
    pub instances: Vec<Instance>,
}

impl MiniBatch {
    pub fn new(t: u64, instances: Vec<Instance>) -> Result<Self> {
        let Some(first) = instances.first() else {
            return Err(Error::Schema(format!("mini-batch {t} is empty")));
        };
        let d = first.dim();
        if let Some(bad) = instances.iter().find(|i| i.dim() != d) {
            return Err(Error::Schema(format!(
                "mini-batch {t}: instance {} has {} features, expected {d}",
                bad.seq,
                bad.dim()
            )));
        }
        Ok(Self { t, instances })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }

    /// Per-class instance counts for `classes` classes. Labels outside the
    /// range are ignored.
    pub fn class_counts(&self, classes: usize) -> Vec<usize> {
        let mut counts = vec![0; classes];
        for inst in &self.instances {
            if inst.label < classes {
                counts[inst.label] += 1;
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    /// Builds a range; a degenerate range (`max <= min`) is widened to
    /// `[min, min + 1]` so a constant feature maps to 0.
    pub fn new(min: f64, max: f64) -> Self {
        if max > min {
            Self { min, max }
        } else {
            Self { min, max: min + 1.0 }
        }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSchema {
    dim: usize,
    classes: usize,
    ranges: Vec<FeatureRange>,
}

impl StreamSchema {
    pub fn new(classes: usize, ranges: Vec<FeatureRange>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Schema("feature count must be >= 1".into()));
        }
        if classes < 2 {
            return Err(Error::Schema("class count must be >= 2".into()));
        }
        if let Some((i, r)) = ranges
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.min.is_finite() && r.max.is_finite() && r.min < r.max))
        {
            return Err(Error::Schema(format!(
                "feature {i} has invalid range [{}, {}]",
                r.min, r.max
            )));
        }
        Ok(Self {
            dim: ranges.len(),
            classes,
            ranges,
        })
    }

    /// Schema whose ranges are already the unit interval.
    pub fn unit(dim: usize, classes: usize) -> Result<Self> {
        Self::new(classes, vec![FeatureRange::new(0.0, 1.0); dim])
    }

    /// Fixes per-feature ranges from the min/max of a (warm-up) batch.
    pub fn fit(batch: &MiniBatch, classes: usize) -> Result<Self> {
        let d = batch.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for inst in &batch.instances {
            for (i, &x) in inst.features.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::Schema(format!(
                        "instance {} feature {i} is not finite",
                        inst.seq
                    )));
                }
                lo[i] = lo[i].min(x);
                hi[i] = hi[i].max(x);
            }
        }
        let ranges = lo
            .into_iter()
            .zip(hi)
            .map(|(a, b)| FeatureRange::new(a, b))
            .collect();
        Self::new(classes, ranges)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn ranges(&self) -> &[FeatureRange] {
        &self.ranges
    }

    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.dim {
            return Err(Error::Schema(format!(
                "expected {} features, got {}",
                self.dim,
                raw.len()
            )));
        }
        Ok(raw
            .iter()
            .zip(&self.ranges)
            .map(|(&x, r)| ((x - r.min) / r.width()).clamp(0.0, 1.0))
            .collect())
    }

    pub fn normalize_instance(&self, inst: &Instance) -> Result<Instance> {
        if inst.label >= self.classes {
            return Err(Error::Schema(format!(
                "instance {} has label {} but the stream has {} classes",
                inst.seq, inst.label, self.classes
            )));
        }
        Ok(Instance::new(
            self.normalize(&inst.features)?,
            inst.label,
            inst.seq,
        ))
    }

    pub fn normalize_batch(&self, batch: &MiniBatch) -> Result<MiniBatch> {
        let instances = batch
            .instances
            .iter()
            .map(|i| self.normalize_instance(i))
            .collect::<Result<Vec<_>>>()?;
        MiniBatch::new(batch.t, instances)
    }
}

pub fn one_hot(label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::Domain(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    Ok(v)
}

pub const DEFAULT_DECAY: f64 = 0.999;

/// Raw and exponentially decayed per-class counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    counts: Vec<u64>,
    decayed: Vec<f64>,
    decay: f64,
}

impl ClassStats {
    pub fn new(classes: usize, decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::Domain(format!("decay {decay} outside (0, 1]")));
        }
        Ok(Self {
            counts: vec![0; classes],
            decayed: vec![0.0; classes],
            decay,
        })
    }

    pub fn update(&mut self, label: usize) -> Result<()> {
        if label >= self.counts.len() {
            return Err(Error::Domain(format!(
                "label {label} out of range for {} classes",
                self.counts.len()
            )));
        }
        self.counts[label] += 1;
        if self.decay < 1.0 {
            for c in &mut self.decayed {
                *c *= self.decay;
            }
        }
        self.decayed[label] += 1.0;
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn decayed(&self) -> &[f64] {
        &self.decayed
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Decayed class priors; `None` before any update.
    pub fn priors(&self) -> Option<Vec<f64>> {
        let total: f64 = self.decayed.iter().sum();
        (total > 0.0).then(|| self.decayed.iter().map(|c| c / total).collect())
    }

    /// Largest over smallest positive raw count.
    pub fn imbalance_ratio(&self) -> Option<f64> {
        let max = *self.counts.iter().max()?;
        let min = self.counts.iter().copied().filter(|&c| c > 0).min()?;
        Some(max as f64 / min as f64)
    }
}

/// CSV layout: `d` numeric feature columns followed by one integer label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub delimiter: u8,
    /// `None` auto-detects a header from a non-numeric first row.
    pub has_header: Option<bool>,
}

impl Default for CsvFormat {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: None,
        }
    }
}

fn parse_record(record: &csv::StringRecord, seq: u64) -> Result<Instance> {
    if record.len() < 2 {
        return Err(Error::Schema(format!(
            "row {seq}: need at least one feature and a label"
        )));
    }
    let last = record.len() - 1;
    let features = (0..last)
        .map(|i| {
            record[i].trim().parse::<f64>().map_err(|_| {
                Error::Schema(format!("row {seq} column {i}: not a number: {:?}", &record[i]))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let label = record[last].trim().parse::<usize>().map_err(|_| {
        Error::Schema(format!(
            "row {seq}: label {:?} is not a class id",
            &record[last]
        ))
    })?;
    Ok(Instance::new(features, label, seq))
}

/// Reads every row of a CSV stream into instances with consecutive `seq`.
pub fn read_csv<R: Read>(reader: R, format: CsvFormat) -> Result<Vec<Instance>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut d = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if row == 0 {
            let skip = match format.has_header {
                Some(h) => h,
                None => parse_record(&record, 0).is_err(),
            };
            if skip {
                continue;
            }
        }
        let inst = parse_record(&record, out.len() as u64)?;
        match d {
            None => d = Some(inst.dim()),
            Some(d) if d != inst.dim() => {
                return Err(Error::Schema(format!(
                    "row {} has {} features, expected {d}",
                    inst.seq,
                    inst.dim()
                )))
            }
            Some(_) => {}
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn write_csv<'a, W, I>(writer: W, instances: I, delimiter: u8, header: bool) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Instance>,
{
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(writer);
    let mut wrote_header = !header;
    for inst in instances {
        if !wrote_header {
            let mut cols: Vec<String> = (0..inst.dim()).map(|i| format!("x{i}")).collect();
            cols.push("label".into());
            wtr.write_record(&cols)?;
            wrote_header = true;
        }
        let mut row: Vec<String> = inst.features.iter().map(|x| x.to_string()).collect();
        row.push(inst.label.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Groups an instance iterator into consecutive mini-batches of `size`.
/// A trailing partial batch is emitted as-is.
pub struct Batcher<I> {
    inner: I,
    size: usize,
    next_t: u64,
}

impl<I: Iterator<Item = Instance>> Batcher<I> {
    pub fn new(inner: I, size: usize) -> Self {
        assert!(size > 0, "batch size must be positive");
        Self {
            inner,
            size,
            next_t: 0,
        }
    }
}

impl<I: Iterator<Item = Instance>> Iterator for Batcher<I> {
    type Item = Result<MiniBatch>;

    fn next(&mut self) -> Option<Self::Item> {
        let chunk: Vec<Instance> = self.inner.by_ref().take(self.size).collect();
        if chunk.is_empty() {
            return None;
        }
        let t = self.next_t;
        self.next_t += 1;
        Some(MiniBatch::new(t, chunk))
    }
}
