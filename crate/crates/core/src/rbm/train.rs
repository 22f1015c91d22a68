//! Contrastive-divergence training with class-balanced weighting.
//!
//! The positive phase clamps `v` to the features and `z` to the one-hot label.
//! Intermediate Gibbs steps draw Bernoulli/categorical samples. The final
//! step is either mean-field or sampled, see [`NegativePhase`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::balance::ClassBalanceState;
use super::params::RbmParameters;
use crate::error::{Error, Result};
use crate::stream::{Instance, MiniBatch, StreamSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmHyperparams {
    pub learning_rate: f64,
    pub gibbs_steps: usize,
    pub batch_size: usize,
    pub hidden_fraction: f64,
    pub beta: f64,
    pub grad_clip: f64,
    pub seed: u64,
    pub negative_phase: NegativePhase,
}

/// How the last Gibbs step is turned into negative-phase statistics. In
/// both cases the hidden statistic is `P(h | v, z)` of the final `(v, z)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativePhase {
    /// `(v, z)` are the mean-field `P(v | h)`, `P(z | h)` of the last hidden
    /// sample. Low variance, but biased: hidden probabilities of a mean are
    /// not the mean of hidden probabilities.
    #[default]
    MeanField,
    /// `(v, z)` are Bernoulli/categorical samples, so the statistics are
    /// unbiased for the model expectation once the chain has mixed.
    Sampled,
}

impl Default for RbmHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            gibbs_steps: 1,
            batch_size: 50,
            hidden_fraction: 0.5,
            beta: 0.99,
            grad_clip: 10.0,
            seed: 0,
            negative_phase: NegativePhase::MeanField,
        }
    }
}

impl RbmHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.gibbs_steps < 1 {
            return Err(Error::Config("gibbs steps must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.hidden_fraction > 0.0 && self.hidden_fraction.is_finite()) {
            return Err(Error::Config(format!(
                "hidden fraction must be > 0, got {}",
                self.hidden_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::Config(format!(
                "beta must be in [0, 1), got {}",
                self.beta
            )));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config("gradient clip must be > 0".into()));
        }
        Ok(())
    }

    pub fn hidden_units(&self, visible: usize) -> usize {
        ((self.hidden_fraction * visible as f64).round() as usize).max(1)
    }
}

/// Gaussian-initialized parameters sized from the schema.
pub fn init_parameters<R: Rng + ?Sized>(
    schema: &StreamSchema,
    hp: &RbmHyperparams,
    rng: &mut R,
) -> RbmParameters {
    let v = schema.dim();
    RbmParameters::random(v, hp.hidden_units(v), schema.classes(), rng)
}

/// First moments of one phase. Second moments are the outer products
/// `v hᵀ` and `h zᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStats {
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
}

impl PhaseStats {
    pub fn vh(&self) -> Vec<f64> {
        outer(&self.v, &self.h)
    }

    pub fn hz(&self) -> Vec<f64> {
        outer(&self.h, &self.z)
    }
}

fn outer(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

#[inline]
fn bernoulli_into<R: Rng + ?Sized>(probs: &[f64], out: &mut [f64], rng: &mut R) {
    for (o, &p) in out.iter_mut().zip(probs) {
        *o = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
    }
}

#[inline]
fn categorical_into<R: Rng + ?Sized>(probs: &[f64], out: &mut [f64], rng: &mut R) {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            pick = k;
            break;
        }
    }
    out.fill(0.0);
    out[pick] = 1.0;
}

/// Scratch buffers for one chain, reused across instances.
struct Chain {
    z_data: Vec<f64>,
    h_data: Vec<f64>,
    h: Vec<f64>,
    h_prob: Vec<f64>,
    v_prob: Vec<f64>,
    z_prob: Vec<f64>,
    v: Vec<f64>,
    z: Vec<f64>,
}

impl Chain {
    fn new(p: &RbmParameters) -> Self {
        Self {
            z_data: vec![0.0; p.classes()],
            h_data: vec![0.0; p.hidden()],
            h: vec![0.0; p.hidden()],
            h_prob: vec![0.0; p.hidden()],
            v_prob: vec![0.0; p.visible()],
            z_prob: vec![0.0; p.classes()],
            v: vec![0.0; p.visible()],
            z: vec![0.0; p.classes()],
        }
    }

    /// Runs the chain. Afterwards the data phase is `(x, h_data, z_data)` and
    /// the reconstruction phase `(v, h_prob, z)`.
    #[allow(clippy::too_many_arguments)]
    fn run<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        label: usize,
        k: usize,
        phase: NegativePhase,
        p: &RbmParameters,
        rng: &mut R,
    ) {
        self.z_data.fill(0.0);
        self.z_data[label] = 1.0;
        p.hidden_probs_into(x, &self.z_data, &mut self.h_data);
        bernoulli_into(&self.h_data, &mut self.h, rng);
        for step in 1..=k {
            p.visible_probs_into(&self.h, &mut self.v_prob);
            p.class_probs_into(&self.h, &mut self.z_prob);
            if step == k && phase == NegativePhase::MeanField {
                self.v.copy_from_slice(&self.v_prob);
                self.z.copy_from_slice(&self.z_prob);
            } else {
                bernoulli_into(&self.v_prob, &mut self.v, rng);
                categorical_into(&self.z_prob, &mut self.z, rng);
            }
            p.hidden_probs_into(&self.v, &self.z, &mut self.h_prob);
            if step < k {
                bernoulli_into(&self.h_prob, &mut self.h, rng);
            }
        }
    }
}

fn check_instance(inst: &Instance, p: &RbmParameters) -> Result<()> {
    if inst.dim() != p.visible() {
        return Err(Error::Domain(format!(
            "instance {} has {} features, network expects {}",
            inst.seq,
            inst.dim(),
            p.visible()
        )));
    }
    if inst.label >= p.classes() {
        return Err(Error::Domain(format!(
            "instance {} label {} out of range for {} classes",
            inst.seq,
            inst.label,
            p.classes()
        )));
    }
    Ok(())
}

/// One CD-k chain started from `instance`; returns (data, reconstruction)
/// statistics.
pub fn gibbs_chain<R: Rng + ?Sized>(
    instance: &Instance,
    k: usize,
    p: &RbmParameters,
    rng: &mut R,
) -> Result<(PhaseStats, PhaseStats)> {
    gibbs_chain_with(instance, k, NegativePhase::default(), p, rng)
}

pub fn gibbs_chain_with<R: Rng + ?Sized>(
    instance: &Instance,
    k: usize,
    phase: NegativePhase,
    p: &RbmParameters,
    rng: &mut R,
) -> Result<(PhaseStats, PhaseStats)> {
    check_instance(instance, p)?;
    if k < 1 {
        return Err(Error::Domain("gibbs steps must be >= 1".into()));
    }
    let mut chain = Chain::new(p);
    chain.run(&instance.features, instance.label, k, phase, p, rng);
    Ok((
        PhaseStats {
            v: instance.features.clone(),
            h: chain.h_data,
            z: chain.z_data,
        },
        PhaseStats {
            v: chain.v,
            h: chain.h_prob,
            z: chain.z,
        },
    ))
}

/// `E_recon − E_data` for every parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub d_w: Vec<f64>,
    pub d_u: Vec<f64>,
    pub d_a: Vec<f64>,
    pub d_b: Vec<f64>,
    pub d_c: Vec<f64>,
}

impl GradientEstimate {
    pub fn zeros_like(p: &RbmParameters) -> Self {
        Self {
            d_w: vec![0.0; p.w.len()],
            d_u: vec![0.0; p.u.len()],
            d_a: vec![0.0; p.a.len()],
            d_b: vec![0.0; p.b.len()],
            d_c: vec![0.0; p.c.len()],
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.d_w
            .iter()
            .chain(&self.d_u)
            .chain(&self.d_a)
            .chain(&self.d_b)
            .chain(&self.d_c)
            .copied()
    }

    fn entries_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.d_w
            .iter_mut()
            .chain(self.d_u.iter_mut())
            .chain(self.d_a.iter_mut())
            .chain(self.d_b.iter_mut())
            .chain(self.d_c.iter_mut())
    }

    pub fn clip(&mut self, limit: f64) {
        for g in self.entries_mut() {
            *g = g.clamp(-limit, limit);
        }
    }

    /// Adds `scale · (recon − data)`.
    pub fn accumulate(&mut self, data: &PhaseStats, recon: &PhaseStats, scale: f64) {
        accumulate_outer(&mut self.d_w, &recon.v, &recon.h, &data.v, &data.h, scale);
        accumulate_outer(&mut self.d_u, &recon.h, &recon.z, &data.h, &data.z, scale);
        accumulate_diff(&mut self.d_a, &recon.v, &data.v, scale);
        accumulate_diff(&mut self.d_b, &recon.h, &data.h, scale);
        accumulate_diff(&mut self.d_c, &recon.z, &data.z, scale);
    }
}

fn accumulate_outer(
    out: &mut [f64],
    ra: &[f64],
    rb: &[f64],
    da: &[f64],
    db: &[f64],
    scale: f64,
) {
    let cols = rb.len();
    for (i, row) in out.chunks_exact_mut(cols).enumerate() {
        let (r, d) = (scale * ra[i], scale * da[i]);
        for ((o, &x), &y) in row.iter_mut().zip(rb).zip(db) {
            *o += r * x - d * y;
        }
    }
}

fn accumulate_diff(out: &mut [f64], r: &[f64], d: &[f64], scale: f64) {
    for ((o, &x), &y) in out.iter_mut().zip(r).zip(d) {
        *o += scale * (x - y);
    }
}

/// Class-balanced CD-k gradient: per-instance statistics weighted by the
/// instance's class weight, averaged over the batch and divided by the
/// stream-average weight ([`ClassBalanceState::mean_weight`]), then clipped
/// entry-wise to `hp.grad_clip`. A batch drawn from the tracked class
/// distribution therefore gets the same overall step size as unweighted
/// training, while a batch holding only majority instances gets a small
/// one. Without counts the batch's own mean weight is used.
pub fn batch_gradient<R: Rng + ?Sized>(
    batch: &MiniBatch,
    p: &RbmParameters,
    hp: &RbmHyperparams,
    balance: &ClassBalanceState,
    rng: &mut R,
) -> Result<GradientEstimate> {
    for inst in &batch.instances {
        check_instance(inst, p)?;
    }
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let weights: Vec<f64> = (0..p.classes()).map(|m| balance.weight(m)).collect();
    let total = match balance.mean_weight() {
        Some(mean) => mean * batch.len() as f64,
        None => batch.instances.iter().map(|i| weights[i.label]).sum(),
    };
    let mut grad = GradientEstimate::zeros_like(p);
    let mut chain = Chain::new(p);
    for inst in &batch.instances {
        chain.run(&inst.features, inst.label, hp.gibbs_steps, hp.negative_phase, p, rng);
        let scale = weights[inst.label] / total;
        accumulate_outer(&mut grad.d_w, &chain.v, &chain.h_prob, &inst.features, &chain.h_data, scale);
        accumulate_outer(&mut grad.d_u, &chain.h_prob, &chain.z, &chain.h_data, &chain.z_data, scale);
        accumulate_diff(&mut grad.d_a, &chain.v, &inst.features, scale);
        accumulate_diff(&mut grad.d_b, &chain.h_prob, &chain.h_data, scale);
        accumulate_diff(&mut grad.d_c, &chain.z, &chain.z_data, scale);
    }
    grad.clip(hp.grad_clip);
    Ok(grad)
}

/// `θ ← θ − η · g` for every block. A non-finite gradient leaves the
/// parameters untouched.
pub fn apply_update(p: &mut RbmParameters, g: &GradientEstimate, eta: f64) -> Result<()> {
    let shapes_match = g.d_w.len() == p.w.len()
        && g.d_u.len() == p.u.len()
        && g.d_a.len() == p.a.len()
        && g.d_b.len() == p.b.len()
        && g.d_c.len() == p.c.len();
    if !shapes_match {
        return Err(Error::Domain("gradient shape does not match parameters".into()));
    }
    if !eta.is_finite() || g.entries().any(|x| !x.is_finite()) {
        return Err(Error::Training("non-finite gradient or learning rate".into()));
    }
    for (theta, grad) in [
        (&mut p.w, &g.d_w),
        (&mut p.u, &g.d_u),
        (&mut p.a, &g.d_a),
        (&mut p.b, &g.d_b),
        (&mut p.c, &g.d_c),
    ] {
        for (t, &d) in theta.iter_mut().zip(grad) {
            *t -= eta * d;
        }
    }
    Ok(())
}

/// One gradient step on a batch.
pub fn train_batch<R: Rng + ?Sized>(
    p: &mut RbmParameters,
    batch: &MiniBatch,
    hp: &RbmHyperparams,
    balance: &ClassBalanceState,
    rng: &mut R,
) -> Result<()> {
    let g = batch_gradient(batch, p, hp, balance, rng)?;
    apply_update(p, &g, hp.learning_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::Instance;
    use proptest::prelude::{any, prop_assert, proptest};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every uniform draw is exactly 0.5.
    struct HalfRng;

    impl RngCore for HalfRng {
        fn next_u32(&mut self) -> u32 {
            1 << 31
        }
        fn next_u64(&mut self) -> u64 {
            1 << 63
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0x80);
        }
    }

    fn random_net(v: usize, h: usize, z: usize, seed: u64, scale: f64) -> RbmParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = RbmParameters::zeros(v, h, z);
        for x in p
            .w
            .iter_mut()
            .chain(p.u.iter_mut())
            .chain(p.a.iter_mut())
            .chain(p.b.iter_mut())
            .chain(p.c.iter_mut())
        {
            *x = rng.random_range(-scale..scale);
        }
        p
    }

    fn batch(items: &[(&[f64], usize)]) -> MiniBatch {
        MiniBatch::new(
            0,
            items
                .iter()
                .enumerate()
                .map(|(i, (x, y))| Instance::new(x.to_vec(), *y, i as u64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn half_rng_draws_half() {
        assert_eq!(HalfRng.random::<f64>(), 0.5);
    }

    #[test]
    fn chain_is_reproducible_under_stub_rng() {
        let p = random_net(3, 2, 2, 4, 1.0);
        let inst = Instance::new(vec![0.2, 0.9, 0.5], 1, 0);
        let a = gibbs_chain(&inst, 3, &p, &mut HalfRng).unwrap();
        let b = gibbs_chain(&inst, 3, &p, &mut HalfRng).unwrap();
        assert_eq!(a, b);
        // Data phase clamps the instance.
        assert_eq!(a.0.v, inst.features);
        assert_eq!(a.0.z, vec![0.0, 1.0]);
        // Negative-phase hidden statistics are probabilities.
        assert!(a.1.h.iter().all(|&h| h > 0.0 && h < 1.0));
    }

    #[test]
    fn zero_net_chain_statistics() {
        // σ(0) = 0.5 everywhere, so hidden probabilities stay at 0.5. The
        // stub draw of 0.5 is never below 0.5: sampled units are 0 and the
        // categorical draw lands on the last class.
        let p = RbmParameters::zeros(2, 2, 2);
        let inst = Instance::new(vec![1.0, 0.0], 0, 0);
        let (data, recon) = gibbs_chain(&inst, 1, &p, &mut HalfRng).unwrap();
        assert_eq!(data.h, vec![0.5, 0.5]);
        assert_eq!(recon.h, vec![0.5, 0.5]);
        assert_eq!(recon.v, vec![0.5, 0.5]);
        assert_eq!(recon.z, vec![0.5, 0.5]);
        let (_, recon) = gibbs_chain_with(&inst, 1, NegativePhase::Sampled, &p, &mut HalfRng).unwrap();
        assert_eq!(recon.h, vec![0.5, 0.5]);
        assert_eq!(recon.v, vec![0.0, 0.0]);
        assert_eq!(recon.z, vec![0.0, 1.0]);
    }

    #[test]
    fn matched_phases_cancel_in_expectation() {
        // With all-zero parameters every unit is independent and uniform, and
        // an instance at the model mean (v = 0.5) has E[recon] = data.
        let p = RbmParameters::zeros(2, 2, 2);
        let hp = RbmHyperparams {
            beta: 0.0,
            ..Default::default()
        };
        let balance = ClassBalanceState::new(2, 0.0).unwrap();
        let items: Vec<(Vec<f64>, usize)> =
            (0..20_000).map(|i| (vec![0.5, 0.5], i % 2)).collect();
        let b = MiniBatch::new(
            0,
            items
                .iter()
                .enumerate()
                .map(|(i, (x, y))| Instance::new(x.clone(), *y, i as u64))
                .collect(),
        )
        .unwrap();
        let g = batch_gradient(&b, &p, &hp, &balance, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(g.entries().all(|x| x.abs() < 0.02), "{g:?}");
    }

    #[test]
    fn batch_gradient_matches_manual_average_when_unweighted() {
        let p = random_net(3, 2, 2, 8, 0.5);
        let hp = RbmHyperparams {
            beta: 0.0,
            gibbs_steps: 2,
            ..Default::default()
        };
        let balance = ClassBalanceState::new(2, 0.0).unwrap();
        let b = batch(&[(&[0.1, 0.5, 0.9], 0), (&[1.0, 0.0, 0.3], 1), (&[0.4, 0.4, 0.4], 1)]);
        let g = batch_gradient(&b, &p, &hp, &balance, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut manual = GradientEstimate::zeros_like(&p);
        for inst in &b.instances {
            let (d, r) = gibbs_chain(inst, 2, &p, &mut rng).unwrap();
            manual.accumulate(&d, &r, 1.0 / 3.0);
        }
        for (x, y) in g.entries().zip(manual.entries()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_class_counts_twice() {
        // Brute force: the gradient of the expanded batch equals the weighted
        // combination of per-instance gradients with class 0 counted twice.
        let p = random_net(3, 2, 2, 12, 0.5);
        let hp = RbmHyperparams {
            beta: 0.0,
            ..Default::default()
        };
        let balance = ClassBalanceState::new(2, 0.0).unwrap();
        let x0: &[f64] = &[0.9, 0.1, 0.2];
        let x1: &[f64] = &[0.3, 0.8, 0.6];
        let expanded = batch(&[(x0, 0), (x0, 0), (x1, 1)]);
        let g = batch_gradient(&expanded, &p, &hp, &balance, &mut HalfRng).unwrap();

        let (d0, r0) = gibbs_chain(&expanded.instances[0], 1, &p, &mut HalfRng).unwrap();
        let (d1, r1) = gibbs_chain(&expanded.instances[2], 1, &p, &mut HalfRng).unwrap();
        let mut expected = GradientEstimate::zeros_like(&p);
        expected.accumulate(&d0, &r0, 2.0 / 3.0);
        expected.accumulate(&d1, &r1, 1.0 / 3.0);
        for (x, y) in g.entries().zip(expected.entries()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn class_weights_scale_contributions() {
        let p = random_net(2, 2, 2, 21, 0.5);
        let hp = RbmHyperparams::default();
        let balance = ClassBalanceState::with_counts(vec![100.0, 2.0], 0.99).unwrap();
        let (w0, w1) = (balance.weight(0), balance.weight(1));
        let b = batch(&[(&[0.9, 0.1], 0), (&[0.2, 0.7], 1)]);
        let g = batch_gradient(&b, &p, &hp, &balance, &mut HalfRng).unwrap();
        let (d0, r0) = gibbs_chain(&b.instances[0], 1, &p, &mut HalfRng).unwrap();
        let (d1, r1) = gibbs_chain(&b.instances[1], 1, &p, &mut HalfRng).unwrap();
        // Stream-average weight over the counts (100, 2), times n = 2.
        let norm = 2.0 * (100.0 * w0 + 2.0 * w1) / 102.0;
        let mut expected = GradientEstimate::zeros_like(&p);
        expected.accumulate(&d0, &r0, w0 / norm);
        expected.accumulate(&d1, &r1, w1 / norm);
        assert!(w1 > 10.0 * w0);
        for (x, y) in g.entries().zip(expected.entries()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_clipped() {
        let p = random_net(2, 2, 2, 1, 0.5);
        let hp = RbmHyperparams {
            grad_clip: 1e-3,
            ..Default::default()
        };
        let balance = ClassBalanceState::new(2, 0.99).unwrap();
        let b = batch(&[(&[1.0, 0.0], 0)]);
        let g = batch_gradient(&b, &p, &hp, &balance, &mut HalfRng).unwrap();
        assert!(g.entries().all(|x| x.abs() <= 1e-3));
    }

    #[test]
    fn apply_update_examples() {
        let mut p = RbmParameters::zeros(1, 1, 2);
        p.w[0] = 0.5;
        let before = p.clone();
        let mut g = GradientEstimate::zeros_like(&p);
        g.d_w[0] = 0.1;

        apply_update(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
        let zero = GradientEstimate::zeros_like(&p);
        apply_update(&mut p, &zero, 0.3).unwrap();
        assert_eq!(p, before);
        apply_update(&mut p, &g, 0.05).unwrap();
        assert!((p.w[0] - 0.495).abs() < 1e-15);

        let mut bad = g.clone();
        bad.d_c[1] = f64::NAN;
        let snapshot = p.clone();
        assert!(matches!(apply_update(&mut p, &bad, 0.05), Err(Error::Training(_))));
        assert_eq!(p, snapshot);
    }

    #[test]
    fn hidden_units_follow_fraction() {
        let hp = RbmHyperparams::default();
        assert_eq!(hp.hidden_units(20), 10);
        let quarter = RbmHyperparams {
            hidden_fraction: 0.25,
            ..Default::default()
        };
        assert_eq!(quarter.hidden_units(20), 5);
        assert_eq!(quarter.hidden_units(1), 1);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(RbmHyperparams::default().validate().is_ok());
        let bad = RbmHyperparams {
            learning_rate: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RbmHyperparams {
            gibbs_steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RbmHyperparams {
            beta: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn update_then_reverse_restores(seed in any::<u64>(), eta in 0.0f64..1.0) {
            let mut p = random_net(3, 2, 2, seed, 1.0);
            let orig = p.clone();
            let mut g = GradientEstimate::zeros_like(&p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            for x in g.d_w.iter_mut().chain(g.d_u.iter_mut()).chain(g.d_a.iter_mut()).chain(g.d_b.iter_mut()).chain(g.d_c.iter_mut()) {
                *x = rng.random_range(-1.0..1.0);
            }
            apply_update(&mut p, &g, eta).unwrap();
            apply_update(&mut p, &g, -eta).unwrap();
            for (a, b) in p.blocks().zip(orig.blocks()) {
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
            }
        }
    }
}
