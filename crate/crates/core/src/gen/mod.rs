//! Synthetic multi-class imbalanced streams with scheduled drift.

mod concept;
mod schedule;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use concept::{Concept, ConceptPair, Family, HyperplaneConcept, RbfCentroid, RbfConcept};
pub use schedule::{
    active_concept, geometric_priors, mixing_coefficient, sample_class, ConceptSelector, DriftKind,
    DriftSchedule, ImbalanceSchedule, PriorKnot, RoleSwap,
};

use crate::error::{Error, Result};
use crate::stream::{Batcher, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImbalanceProfile {
    #[default]
    Static,
    Triangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftConfig {
    pub kind: DriftKind,
    pub t1: u64,
    pub t2: u64,
    /// Number of affected classes, smallest first; all classes when unset.
    pub affected: Option<usize>,
    /// Explicit affected classes; overrides `affected`.
    pub affected_classes: Option<Vec<usize>>,
    /// Fraction of the way affected classes move toward a random new
    /// position (1 = complete relocation).
    pub magnitude: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            kind: DriftKind::None,
            t1: 0,
            t2: 0,
            affected: None,
            affected_classes: None,
            magnitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub family: Family,
    pub dim: usize,
    pub classes: usize,
    pub length: u64,
    pub seed: u64,
    /// Largest over smallest class prior.
    pub ir: f64,
    pub profile: ImbalanceProfile,
    /// Explicit prior trajectory; overrides `ir` and `profile` when set.
    pub knots: Vec<PriorKnot>,
    pub role_swaps: Vec<RoleSwap>,
    pub drift: DriftConfig,
    /// Latent dimension of the hyperplane family.
    pub latent_dim: usize,
    pub noise: f64,
    pub centroids_per_class: usize,
    pub spread: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            family: Family::Hyperplane,
            dim: 20,
            classes: 5,
            length: 100_000,
            seed: 0,
            ir: 100.0,
            profile: ImbalanceProfile::Static,
            knots: Vec::new(),
            role_swaps: Vec::new(),
            drift: DriftConfig::default(),
            latent_dim: 4,
            noise: 0.05,
            centroids_per_class: 2,
            spread: 0.1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Config("class count must be >= 2".into()));
        }
        if self.dim < 1 {
            return Err(Error::Config("feature count must be >= 1".into()));
        }
        if self.length < 1 {
            return Err(Error::Config("stream length must be >= 1".into()));
        }
        if !(self.ir >= 1.0 && self.ir.is_finite()) {
            return Err(Error::Config(format!("imbalance ratio must be >= 1, got {}", self.ir)));
        }
        if self.latent_dim < 1 {
            return Err(Error::Config("latent dimension must be >= 1".into()));
        }
        if self.centroids_per_class < 1 {
            return Err(Error::Config("centroids per class must be >= 1".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config("noise must be >= 0".into()));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::Config("spread must be > 0".into()));
        }
        if !(self.drift.magnitude >= 0.0 && self.drift.magnitude.is_finite()) {
            return Err(Error::Config("drift magnitude must be >= 0".into()));
        }
        if let Some(c) = self.drift.affected {
            if c == 0 || c > self.classes {
                return Err(Error::Config(format!(
                    "affected class count {c} outside 1..={}",
                    self.classes
                )));
            }
        }
        if let Some(cs) = &self.drift.affected_classes {
            if cs.is_empty() || cs.iter().any(|&c| c >= self.classes) {
                return Err(Error::Config("affected classes must be non-empty and in range".into()));
            }
        }
        self.imbalance_schedule()?;
        self.drift_schedule(&self.imbalance_schedule()?)?;
        Ok(())
    }

    pub fn imbalance_schedule(&self) -> Result<ImbalanceSchedule> {
        let base = if !self.knots.is_empty() {
            ImbalanceSchedule::new(self.classes, self.knots.clone(), Vec::new())?
        } else {
            match self.profile {
                ImbalanceProfile::Static => ImbalanceSchedule::static_ir(self.classes, self.ir)?,
                ImbalanceProfile::Triangle => {
                    ImbalanceSchedule::triangle(self.classes, self.ir, self.length)?
                }
            }
        };
        base.with_swaps(self.role_swaps.clone())
    }

    pub fn drift_schedule(&self, imb: &ImbalanceSchedule) -> Result<DriftSchedule> {
        if self.drift.kind == DriftKind::None {
            return Ok(DriftSchedule::none());
        }
        let affected = match (&self.drift.affected_classes, self.drift.affected) {
            (Some(cs), _) => cs.clone(),
            (None, Some(c)) => imb.smallest_classes(self.drift.t1, c)?,
            (None, None) => (0..self.classes).collect(),
        };
        let t2 = match self.drift.kind {
            DriftKind::Sudden | DriftKind::Virtual => self.drift.t2.max(self.drift.t1),
            _ => self.drift.t2,
        };
        DriftSchedule::new(self.drift.kind, self.drift.t1, t2, affected)
    }

    pub fn build(&self) -> Result<StreamGenerator> {
        StreamGenerator::new(self.clone())
    }
}

/// Artificial benchmark families: `hyperplane{5,10,20}` (gradual) and
/// `rbf{5,10,20}` (sudden), with `d = 4Z` and IR 100/200/300.
pub fn make_benchmark(name: &str, length: u64, seed: u64) -> Result<GeneratorConfig> {
    let lower = name.to_ascii_lowercase();
    let (family, rest) = if let Some(r) = lower.strip_prefix("hyperplane") {
        (Family::Hyperplane, r)
    } else if let Some(r) = lower.strip_prefix("rbf") {
        (Family::Rbf, r)
    } else {
        return Err(Error::Config(format!("unknown benchmark {name:?}")));
    };
    let (classes, ir) = match rest {
        "5" => (5, 100.0),
        "10" => (10, 200.0),
        "20" => (20, 300.0),
        _ => return Err(Error::Config(format!("unknown benchmark {name:?}"))),
    };
    let kind = match family {
        Family::Hyperplane => DriftKind::Gradual,
        Family::Rbf => DriftKind::Sudden,
    };
    let t1 = length / 2;
    let t2 = match kind {
        DriftKind::Gradual => (t1 + length / 10).min(length).max(t1 + 1),
        _ => t1,
    };
    Ok(GeneratorConfig {
        family,
        dim: 4 * classes,
        classes,
        length,
        seed,
        ir,
        drift: DriftConfig {
            kind,
            t1,
            t2,
            ..DriftConfig::default()
        },
        ..GeneratorConfig::default()
    })
}

/// Restricts drift to the `count` smallest classes at the drift start.
pub fn inject_local_drift(mut config: GeneratorConfig, count: usize) -> Result<GeneratorConfig> {
    if count == 0 || count > config.classes {
        return Err(Error::Config(format!(
            "affected class count {count} outside 1..={}",
            config.classes
        )));
    }
    config.drift.affected = Some(count);
    config.drift.affected_classes = None;
    config.validate()?;
    Ok(config)
}

/// Lazy instance stream.
#[derive(Debug, Clone)]
pub struct StreamGenerator {
    config: GeneratorConfig,
    concepts: ConceptPair,
    drift: DriftSchedule,
    imbalance: ImbalanceSchedule,
    rng: ChaCha8Rng,
    next: u64,
}

impl StreamGenerator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let imbalance = config.imbalance_schedule()?;
        let drift = config.drift_schedule(&imbalance)?;
        let mut setup = ChaCha8Rng::seed_from_u64(config.seed);
        let old = match config.family {
            Family::Hyperplane => Concept::Hyperplane(HyperplaneConcept::random(
                config.dim,
                config.classes,
                config.latent_dim,
                config.noise,
                &mut setup,
            )),
            Family::Rbf => Concept::Rbf(RbfConcept::random(
                config.dim,
                config.classes,
                config.centroids_per_class,
                config.spread,
                &mut setup,
            )),
        };
        let new = if drift.kind == DriftKind::None {
            old.clone()
        } else {
            old.drifted(&drift.affected_classes, config.drift.magnitude, &mut setup)?
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Self {
            concepts: ConceptPair { old, new },
            drift,
            imbalance,
            rng,
            next: 0,
            config,
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn concepts(&self) -> &ConceptPair {
        &self.concepts
    }

    pub fn drift_schedule(&self) -> &DriftSchedule {
        &self.drift
    }

    pub fn imbalance(&self) -> &ImbalanceSchedule {
        &self.imbalance
    }

    /// Batch indices at which drift starts, for batches of `batch_size`.
    pub fn drift_batches(&self, batch_size: usize) -> Vec<u64> {
        if self.drift.kind == DriftKind::None {
            Vec::new()
        } else {
            vec![self.drift.t1 / batch_size as u64]
        }
    }

    pub fn sample_instance(&mut self, j: u64) -> Result<Instance> {
        let priors = self.imbalance.priors_at(j);
        let class = sample_class(&priors, &mut self.rng);
        let selector = if self.drift.affects(class) {
            active_concept(j, &self.drift, &mut self.rng)
        } else {
            ConceptSelector::Old
        };
        let virtual_drift = self.drift.kind == DriftKind::Virtual;
        let x = self
            .concepts
            .sample(class, selector, virtual_drift, &mut self.rng)?;
        Ok(Instance::new(x, class, j))
    }

    pub fn batches(self, batch_size: usize) -> Batcher<Self> {
        Batcher::new(self, batch_size)
    }

    /// Writes the remaining stream as CSV (features then label, with
    /// header), one instance at a time.
    pub fn export_csv<W: Write>(self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut cols: Vec<String> = (0..self.config.dim).map(|i| format!("x{i}")).collect();
        cols.push("label".into());
        wtr.write_record(&cols)?;
        for inst in self {
            let mut row: Vec<String> = inst.features.iter().map(|x| x.to_string()).collect();
            row.push(inst.label.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl Iterator for StreamGenerator {
    type Item = Instance;

    fn next(&mut self) -> Option<Instance> {
        if self.next >= self.config.length {
            return None;
        }
        let j = self.next;
        self.next += 1;
        // Configuration was validated at construction; sampling cannot fail.
        self.sample_instance(j).ok()
    }
}
