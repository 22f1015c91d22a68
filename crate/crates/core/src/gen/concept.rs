//! Class-conditional feature generators.
//!
//! A hyperplane concept partitions a `k`-dimensional latent cube into class
//! regions by linear boundaries (the Voronoi cells of per-class anchors) and
//! maps latent points into feature space through a fixed random linear
//! loading plus Gaussian noise. A radial-basis concept gives every class a
//! few Gaussian centroids in feature space.
//!
//! Drift relocates the affected classes: hyperplane classes get a latent
//! translation, radial-basis classes get moved centroids.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::schedule::ConceptSelector;
use crate::error::{Error, Result};

const MAX_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Hyperplane,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneConcept {
    pub dim: usize,
    pub latent: usize,
    /// `dim x latent`, row-major.
    pub loading: Vec<f64>,
    pub noise: f64,
    /// Region anchors, `classes x latent`. The region of class `c` is the
    /// set of latent points closer to anchor `c` than to any other, i.e.
    /// `argmax_c (a_c · s − |a_c|² / 2)`.
    pub anchors: Vec<Vec<f64>>,
    /// Per-class latent translation applied after region sampling.
    pub shifts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfCentroid {
    pub center: Vec<f64>,
    pub spread: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfConcept {
    pub dim: usize,
    /// Centroids per class.
    pub centroids: Vec<Vec<RbfCentroid>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Concept {
    Hyperplane(HyperplaneConcept),
    Rbf(RbfConcept),
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn lerp(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
        .collect()
}

impl HyperplaneConcept {
    pub fn random<R: Rng + ?Sized>(
        dim: usize,
        classes: usize,
        latent: usize,
        noise: f64,
        rng: &mut R,
    ) -> Self {
        let loading = (0..dim * latent).map(|_| normal(rng)).collect();
        let anchors = (0..classes)
            .map(|_| (0..latent).map(|_| rng.random_range(0.1..0.9)).collect())
            .collect();
        Self {
            dim,
            latent,
            loading,
            noise,
            anchors,
            shifts: vec![vec![0.0; latent]; classes],
        }
    }

    pub fn region(&self, s: &[f64]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (c, a) in self.anchors.iter().enumerate() {
            let dot: f64 = a.iter().zip(s).map(|(x, y)| x * y).sum();
            let norm2: f64 = a.iter().map(|x| x * x).sum();
            let score = dot - 0.5 * norm2;
            if score > best.1 {
                best = (c, score);
            }
        }
        best.0
    }

    fn emit<R: Rng + ?Sized>(&self, s: &[f64], rng: &mut R) -> Vec<f64> {
        self.loading
            .chunks_exact(self.latent)
            .map(|row| {
                let v: f64 = row.iter().zip(s).map(|(a, b)| a * b).sum();
                v + self.noise * normal(rng)
            })
            .collect()
    }

    fn latent_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.latent).map(|_| rng.random::<f64>()).collect()
    }

    /// Region-then-shift sampling: class `c`'s region is sampled and then
    /// translated, so a shifted class moves into other classes' territory.
    fn sample<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        let mut s = None;
        for _ in 0..MAX_TRIES {
            let cand = self.latent_point(rng);
            if self.region(&cand) == class {
                s = Some(cand);
                break;
            }
        }
        let mut s = s.unwrap_or_else(|| self.anchors[class].clone());
        for (x, d) in s.iter_mut().zip(&self.shifts[class]) {
            *x += d;
        }
        self.emit(&s, rng)
    }

    /// Shift-then-label sampling: the translated point must still fall in
    /// class `c`'s region under `rule`.
    fn sample_virtual<R: Rng + ?Sized>(&self, rule: &Self, class: usize, rng: &mut R) -> Vec<f64> {
        for _ in 0..MAX_TRIES {
            let mut cand = self.latent_point(rng);
            for (x, d) in cand.iter_mut().zip(&self.shifts[class]) {
                *x += d;
            }
            if rule.region(&cand) == class {
                return self.emit(&cand, rng);
            }
        }
        self.emit(&rule.anchors[class], rng)
    }

    fn blend(&self, other: &Self, alpha: f64) -> Self {
        Self {
            shifts: self
                .shifts
                .iter()
                .zip(&other.shifts)
                .map(|(a, b)| lerp(a, b, alpha))
                .collect(),
            ..self.clone()
        }
    }
}

impl RbfConcept {
    pub fn random<R: Rng + ?Sized>(
        dim: usize,
        classes: usize,
        per_class: usize,
        spread: f64,
        rng: &mut R,
    ) -> Self {
        let centroids = (0..classes)
            .map(|_| {
                (0..per_class)
                    .map(|_| RbfCentroid {
                        center: (0..dim).map(|_| rng.random::<f64>()).collect(),
                        spread: spread * rng.random_range(0.5..1.5),
                        weight: rng.random_range(0.5..1.5),
                    })
                    .collect()
            })
            .collect();
        Self { dim, centroids }
    }

    /// Class of the nearest centroid (distance scaled by spread).
    pub fn region(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, cs) in self.centroids.iter().enumerate() {
            for k in cs {
                let d2: f64 = k.center.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                let d = d2 / (k.spread * k.spread);
                if d < best.1 {
                    best = (c, d);
                }
            }
        }
        best.0
    }

    fn pick<'a, R: Rng + ?Sized>(&'a self, class: usize, rng: &mut R) -> &'a RbfCentroid {
        let cs = &self.centroids[class];
        let total: f64 = cs.iter().map(|c| c.weight).sum();
        let mut u = rng.random::<f64>() * total;
        for c in cs {
            if u < c.weight {
                return c;
            }
            u -= c.weight;
        }
        &cs[cs.len() - 1]
    }

    fn sample<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        let c = self.pick(class, rng);
        c.center.iter().map(|m| m + c.spread * normal(rng)).collect()
    }

    fn sample_virtual<R: Rng + ?Sized>(&self, rule: &Self, class: usize, rng: &mut R) -> Vec<f64> {
        for _ in 0..MAX_TRIES {
            let x = self.sample(class, rng);
            if rule.region(&x) == class {
                return x;
            }
        }
        rule.sample(class, rng)
    }

    fn blend(&self, other: &Self, alpha: f64) -> Self {
        Self {
            dim: self.dim,
            centroids: self
                .centroids
                .iter()
                .zip(&other.centroids)
                .map(|(a, b)| {
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| RbfCentroid {
                            center: lerp(&x.center, &y.center, alpha),
                            spread: (1.0 - alpha) * x.spread + alpha * y.spread,
                            weight: (1.0 - alpha) * x.weight + alpha * y.weight,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl Concept {
    pub fn dim(&self) -> usize {
        match self {
            Concept::Hyperplane(h) => h.dim,
            Concept::Rbf(r) => r.dim,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Concept::Hyperplane(h) => h.anchors.len(),
            Concept::Rbf(r) => r.centroids.len(),
        }
    }

    /// A copy in which every class in `classes` has been relocated
    /// `magnitude` of the way toward a fresh random position: a new anchor
    /// in the latent cube for hyperplane (applied as a latent translation),
    /// new centers in the unit cube for radial-basis. `magnitude = 1` is a
    /// full re-draw.
    pub fn drifted<R: Rng + ?Sized>(&self, classes: &[usize], magnitude: f64, rng: &mut R) -> Result<Self> {
        if let Some(&c) = classes.iter().find(|&&c| c >= self.classes()) {
            return Err(Error::Config(format!("affected class {c} out of range")));
        }
        let mut out = self.clone();
        match &mut out {
            Concept::Hyperplane(h) => {
                for &c in classes {
                    for (s, a) in h.shifts[c].iter_mut().zip(&h.anchors[c]) {
                        let target: f64 = rng.random();
                        *s += magnitude * (target - a);
                    }
                }
            }
            Concept::Rbf(r) => {
                for &c in classes {
                    for k in &mut r.centroids[c] {
                        for x in k.center.iter_mut() {
                            let target: f64 = rng.random();
                            *x += magnitude * (target - *x);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Parameters interpolated `alpha` of the way toward `other`. Exactly
    /// `self` at 0 and exactly `other` at 1.
    pub fn blend(&self, other: &Self, alpha: f64) -> Result<Self> {
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        if alpha == 1.0 {
            return Ok(other.clone());
        }
        match (self, other) {
            (Concept::Hyperplane(a), Concept::Hyperplane(b)) => Ok(Concept::Hyperplane(a.blend(b, alpha))),
            (Concept::Rbf(a), Concept::Rbf(b)) => Ok(Concept::Rbf(a.blend(b, alpha))),
            _ => Err(Error::Config("cannot blend concepts of different families".into())),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        match self {
            Concept::Hyperplane(h) => h.sample(class, rng),
            Concept::Rbf(r) => r.sample(class, rng),
        }
    }

    /// Samples from `self` but keeps only points that `rule` labels `class`.
    pub fn sample_virtual<R: Rng + ?Sized>(&self, rule: &Self, class: usize, rng: &mut R) -> Vec<f64> {
        match (self, rule) {
            (Concept::Hyperplane(h), Concept::Hyperplane(g)) => h.sample_virtual(g, class, rng),
            (Concept::Rbf(r), Concept::Rbf(g)) => r.sample_virtual(g, class, rng),
            _ => self.sample(class, rng),
        }
    }
}

/// The old/new concept pair of one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptPair {
    pub old: Concept,
    pub new: Concept,
}

impl ConceptPair {
    /// Features for `class` under `selector`. With `virtual_drift`, the new
    /// concept's class distribution is filtered by the old labeling rule.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        class: usize,
        selector: ConceptSelector,
        virtual_drift: bool,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        Ok(match selector {
            ConceptSelector::Old => self.old.sample(class, rng),
            ConceptSelector::New if virtual_drift => self.new.sample_virtual(&self.old, class, rng),
            ConceptSelector::New => self.new.sample(class, rng),
            ConceptSelector::Blend(alpha) => self.old.blend(&self.new, alpha)?.sample(class, rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper() -> Concept {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        Concept::Hyperplane(HyperplaneConcept::random(6, 3, 3, 0.05, &mut rng))
    }

    fn rbf() -> Concept {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        Concept::Rbf(RbfConcept::random(6, 3, 2, 0.1, &mut rng))
    }

    #[test]
    fn blend_endpoints_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in [hyper(), rbf()] {
            let d = c.drifted(&[0, 2], 0.5, &mut rng).unwrap();
            assert_eq!(c.blend(&d, 0.0).unwrap(), c);
            assert_eq!(c.blend(&d, 1.0).unwrap(), d);
            assert_ne!(c.blend(&d, 0.5).unwrap(), c);
        }
    }

    #[test]
    fn drift_leaves_other_classes_alone() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = rbf();
        let d = c.drifted(&[1], 0.5, &mut rng).unwrap();
        match (&c, &d) {
            (Concept::Rbf(a), Concept::Rbf(b)) => {
                assert_eq!(a.centroids[0], b.centroids[0]);
                assert_ne!(a.centroids[1], b.centroids[1]);
            }
            _ => unreachable!(),
        }
        assert!(c.drifted(&[3], 0.5, &mut rng).is_err());
    }

    #[test]
    fn hyperplane_samples_come_from_their_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let Concept::Hyperplane(h) = hyper() else { unreachable!() };
        for class in 0..3 {
            for _ in 0..50 {
                let mut s = None;
                for _ in 0..MAX_TRIES {
                    let cand = h.latent_point(&mut rng);
                    if h.region(&cand) == class {
                        s = Some(cand);
                        break;
                    }
                }
                assert!(s.is_some());
            }
        }
    }

    #[test]
    fn shifted_class_mean_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c = rbf();
        let d = c.drifted(&[0], 1.0, &mut rng).unwrap();
        let pair = ConceptPair { old: c, new: d };
        let mean = |sel, class, rng: &mut ChaCha8Rng| {
            let mut m = vec![0.0; 6];
            for _ in 0..4000 {
                for (a, x) in m.iter_mut().zip(pair.sample(class, sel, false, rng).unwrap()) {
                    *a += x / 4000.0;
                }
            }
            m
        };
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let before0 = mean(ConceptSelector::Old, 0, &mut rng);
        let after0 = mean(ConceptSelector::New, 0, &mut rng);
        let before1 = mean(ConceptSelector::Old, 1, &mut rng);
        let after1 = mean(ConceptSelector::New, 1, &mut rng);
        assert!(dist(&before0, &after0) > 0.5);
        assert!(dist(&before1, &after1) < 0.05);
    }

    #[test]
    fn virtual_samples_respect_old_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = rbf();
        let d = c.drifted(&[0, 1, 2], 0.2, &mut rng).unwrap();
        let pair = ConceptPair { old: c.clone(), new: d };
        let Concept::Rbf(rule) = &c else { unreachable!() };
        for class in 0..3 {
            for _ in 0..100 {
                let x = pair.sample(class, ConceptSelector::New, true, &mut rng).unwrap();
                assert_eq!(rule.region(&x), class);
            }
        }
    }
}
