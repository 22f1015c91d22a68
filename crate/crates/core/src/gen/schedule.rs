use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DriftKind {
    #[default]
    None,
    Sudden,
    Gradual,
    Incremental,
    Virtual,
}

impl std::str::FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => DriftKind::None,
            "sudden" => DriftKind::Sudden,
            "gradual" => DriftKind::Gradual,
            "incremental" => DriftKind::Incremental,
            "virtual" => DriftKind::Virtual,
            other => return Err(Error::Config(format!("unknown drift kind {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSchedule {
    pub kind: DriftKind,
    pub t1: u64,
    pub t2: u64,
    pub affected_classes: Vec<usize>,
}

impl DriftSchedule {
    pub fn none() -> Self {
        Self {
            kind: DriftKind::None,
            t1: 0,
            t2: 0,
            affected_classes: Vec::new(),
        }
    }

    pub fn new(kind: DriftKind, t1: u64, t2: u64, affected_classes: Vec<usize>) -> Result<Self> {
        let s = Self {
            kind,
            t1,
            t2,
            affected_classes,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1 > self.t2 {
            return Err(Error::Schedule(format!(
                "t1 ({}) must not exceed t2 ({})",
                self.t1, self.t2
            )));
        }
        if self.kind != DriftKind::None && self.affected_classes.is_empty() {
            return Err(Error::Schedule("drift needs at least one affected class".into()));
        }
        if matches!(self.kind, DriftKind::Gradual | DriftKind::Incremental) && self.t1 == self.t2 {
            return Err(Error::Schedule(
                "gradual and incremental drift need t1 < t2; use sudden instead".into(),
            ));
        }
        Ok(())
    }

    pub fn affects(&self, class: usize) -> bool {
        self.kind != DriftKind::None && self.affected_classes.contains(&class)
    }
}

/// `α = (j − t1) / (t2 − t1)`.
pub fn mixing_coefficient(j: u64, t1: u64, t2: u64) -> Result<f64> {
    if t1 >= t2 {
        return Err(Error::Schedule(format!(
            "mixing needs t1 < t2, got t1={t1}, t2={t2}"
        )));
    }
    if j < t1 || j > t2 {
        return Err(Error::Schedule(format!("index {j} outside [{t1}, {t2}]")));
    }
    Ok((j - t1) as f64 / (t2 - t1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConceptSelector {
    Old,
    New,
    /// Parameters interpolated linearly, `α` toward the new concept.
    Blend(f64),
}

pub fn active_concept<R: Rng + ?Sized>(j: u64, sched: &DriftSchedule, rng: &mut R) -> ConceptSelector {
    use ConceptSelector::*;
    match sched.kind {
        DriftKind::None => Old,
        DriftKind::Sudden | DriftKind::Virtual => {
            if j < sched.t1 {
                Old
            } else {
                New
            }
        }
        DriftKind::Incremental | DriftKind::Gradual if j < sched.t1 => Old,
        DriftKind::Incremental | DriftKind::Gradual if j >= sched.t2 => New,
        DriftKind::Incremental => Blend(mixing_coefficient(j, sched.t1, sched.t2).unwrap_or(1.0)),
        DriftKind::Gradual => {
            let alpha = mixing_coefficient(j, sched.t1, sched.t2).unwrap_or(1.0);
            // δ in [0, 1); strict comparison keeps j = t1 on the old concept.
            if rng.random::<f64>() < alpha {
                New
            } else {
                Old
            }
        }
    }
}

/// Class priors at knot `at`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorKnot {
    pub at: u64,
    pub priors: Vec<f64>,
}

/// From index `at` on, classes `a` and `b` exchange priors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSwap {
    pub at: u64,
    pub a: usize,
    pub b: usize,
}

/// Piecewise-linear class priors with optional role swaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSchedule {
    classes: usize,
    knots: Vec<PriorKnot>,
    swaps: Vec<RoleSwap>,
}

/// Priors decreasing geometrically from class 0 so that
/// `max / min = ir`.
pub fn geometric_priors(classes: usize, ir: f64) -> Result<Vec<f64>> {
    if classes < 2 {
        return Err(Error::Config("class count must be >= 2".into()));
    }
    if !(ir >= 1.0 && ir.is_finite()) {
        return Err(Error::Config(format!("imbalance ratio must be >= 1, got {ir}")));
    }
    let raw: Vec<f64> = (0..classes)
        .map(|c| ir.powf(-(c as f64) / (classes - 1) as f64))
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|p| p / total).collect())
}

impl ImbalanceSchedule {
    pub fn new(classes: usize, mut knots: Vec<PriorKnot>, mut swaps: Vec<RoleSwap>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Schedule("imbalance schedule needs a knot".into()));
        }
        knots.sort_by_key(|k| k.at);
        if knots.windows(2).any(|w| w[0].at == w[1].at) {
            return Err(Error::Schedule("duplicate knot index".into()));
        }
        for k in &mut knots {
            if k.priors.len() != classes {
                return Err(Error::Schedule(format!(
                    "knot at {} has {} priors for {classes} classes",
                    k.at,
                    k.priors.len()
                )));
            }
            if k.priors.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::Schedule(format!("knot at {} has invalid priors", k.at)));
            }
            let total: f64 = k.priors.iter().sum();
            if total <= 0.0 {
                return Err(Error::Schedule(format!("knot at {} has zero mass", k.at)));
            }
            k.priors.iter_mut().for_each(|p| *p /= total);
        }
        for s in &swaps {
            if s.a >= classes || s.b >= classes {
                return Err(Error::Schedule(format!(
                    "role swap ({}, {}) out of range",
                    s.a, s.b
                )));
            }
        }
        swaps.sort_by_key(|s| s.at);
        Ok(Self {
            classes,
            knots,
            swaps,
        })
    }

    pub fn fixed(priors: Vec<f64>) -> Result<Self> {
        Self::new(priors.len(), vec![PriorKnot { at: 0, priors }], Vec::new())
    }

    pub fn static_ir(classes: usize, ir: f64) -> Result<Self> {
        Self::fixed(geometric_priors(classes, ir)?)
    }

    /// IR falls from `ir` to `sqrt(ir)` at the midpoint and rises back to
    /// `ir` at `length`.
    pub fn triangle(classes: usize, ir: f64, length: u64) -> Result<Self> {
        let mid = length / 2;
        let mut knots = vec![PriorKnot {
            at: 0,
            priors: geometric_priors(classes, ir)?,
        }];
        if mid > 0 {
            knots.push(PriorKnot {
                at: mid,
                priors: geometric_priors(classes, ir.sqrt())?,
            });
        }
        if length > mid {
            knots.push(PriorKnot {
                at: length,
                priors: geometric_priors(classes, ir)?,
            });
        }
        Self::new(classes, knots, Vec::new())
    }

    pub fn with_swaps(mut self, swaps: Vec<RoleSwap>) -> Result<Self> {
        self.swaps.extend(swaps);
        Self::new(self.classes, self.knots, self.swaps)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn swaps(&self) -> &[RoleSwap] {
        &self.swaps
    }

    /// Priors at instance index `j`; sums to 1.
    pub fn priors_at(&self, j: u64) -> Vec<f64> {
        let k = &self.knots;
        let mut p = match k.iter().position(|kn| kn.at > j) {
            Some(0) => k[0].priors.clone(),
            None => k[k.len() - 1].priors.clone(),
            Some(i) => {
                let (a, b) = (&k[i - 1], &k[i]);
                let alpha = (j - a.at) as f64 / (b.at - a.at) as f64;
                a.priors
                    .iter()
                    .zip(&b.priors)
                    .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
                    .collect()
            }
        };
        for s in self.swaps.iter().take_while(|s| s.at <= j) {
            p.swap(s.a, s.b);
        }
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }

    /// The `count` classes with the smallest prior at `j`, smallest first.
    /// Ties go to the higher class id.
    pub fn smallest_classes(&self, j: u64, count: usize) -> Result<Vec<usize>> {
        if count == 0 || count > self.classes {
            return Err(Error::Config(format!(
                "affected class count {count} outside 1..={}",
                self.classes
            )));
        }
        let p = self.priors_at(j);
        let mut ids: Vec<usize> = (0..self.classes).collect();
        ids.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a)));
        ids.truncate(count);
        Ok(ids)
    }

    /// Largest over smallest prior at `j`.
    pub fn imbalance_ratio_at(&self, j: u64) -> f64 {
        let p = self.priors_at(j);
        let max = p.iter().cloned().fold(0.0, f64::max);
        let min = p.iter().cloned().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn sample_class<R: Rng + ?Sized>(priors: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // Rounding left `u` above the cumulative sum: last class with mass.
    priors.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
