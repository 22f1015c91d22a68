//! Per-class reconstruction-error trends.
//!
//! Each class keeps the `(t, R)` pairs of its current window together with
//! the running sums `Σ tR`, `Σ t`, `Σ R` and `Σ t²`, updated incrementally on
//! insertion and eviction. The least-squares slope over the window is
//!
//! ```text
//! Q = (n·ΣtR − Σt·ΣR) / (n·Σt² − (Σt)²)
//! ```
//!
//! The window length adapts ADWIN-style: whenever an older and a newer part
//! of the window have significantly different mean error, the older part is
//! dropped.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendConfig {
    pub min_window: usize,
    pub max_window: usize,
    /// ADWIN confidence `δ_w`.
    pub delta: f64,
    /// Smallest older sub-window considered when testing for a cut.
    pub min_old: usize,
    /// Floor on the pooled standard deviation, relative to the window mean.
    pub min_relative_sd: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        Self {
            min_window: 8,
            max_window: 200,
            delta: 0.002,
            min_old: 5,
            min_relative_sd: 0.01,
        }
    }
}

impl TrendConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_window < 2 || self.min_window > self.max_window {
            return Err(Error::Config(format!(
                "window bounds must satisfy 2 <= min ({}) <= max ({})",
                self.min_window, self.max_window
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0, 1)", self.delta)));
        }
        if self.min_old < 2 {
            return Err(Error::Config("min_old must be >= 2".into()));
        }
        if !(self.min_relative_sd >= 0.0) {
            return Err(Error::Config("min_relative_sd must be >= 0".into()));
        }
        Ok(())
    }
}

/// Running sums over the retained window, with times measured from
/// [`ClassTrend::origin`] (zero until the first periodic rebuild).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendSums {
    pub tr: f64,
    pub t: f64,
    pub r: f64,
    pub t2: f64,
}

/// Outcome of one adaptive-window step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowChange {
    Unchanged,
    Grew,
    /// The oldest `dropped` pairs were removed because the remaining newer
    /// part differs in mean by more than the cut threshold.
    Shrunk {
        dropped: usize,
        old_mean: f64,
        new_mean: f64,
    },
}

impl WindowChange {
    /// True when the window was cut and the newer part has higher error.
    pub fn is_increase(&self) -> bool {
        matches!(self, WindowChange::Shrunk { old_mean, new_mean, .. } if new_mean > old_mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTrend {
    history: VecDeque<(u64, f64)>,
    sums: TrendSums,
    origin: u64,
    window: usize,
    last_t: Option<u64>,
    evictions: usize,
}

impl ClassTrend {
    pub fn new(window: usize) -> Self {
        Self {
            history: VecDeque::new(),
            sums: TrendSums::default(),
            origin: 0,
            window,
            last_t: None,
            evictions: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Effective count `n̄`: the number of retained pairs.
    pub fn effective_count(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.history.iter().copied()
    }

    pub fn sums(&self) -> TrendSums {
        self.sums
    }

    pub fn origin(&self) -> u64 {
        self.origin
    }

    pub fn last_t(&self) -> Option<u64> {
        self.last_t
    }

    fn rel(&self, t: u64) -> f64 {
        (t - self.origin) as f64
    }

    fn add(&mut self, t: u64, r: f64) {
        let x = self.rel(t);
        self.sums.tr += x * r;
        self.sums.t += x;
        self.sums.r += r;
        self.sums.t2 += x * x;
        self.history.push_back((t, r));
    }

    fn evict_oldest(&mut self) {
        if let Some((t, r)) = self.history.pop_front() {
            let x = self.rel(t);
            self.sums.tr -= x * r;
            self.sums.t -= x;
            self.sums.r -= r;
            self.sums.t2 -= x * x;
            self.evictions += 1;
        }
        if self.history.is_empty() {
            self.sums = TrendSums::default();
        } else if self.evictions >= self.history.len() {
            // Re-centering once per window length keeps times near the
            // origin, so the slope denominator does not cancel, at O(1)
            // amortized cost.
            self.rebuild();
        }
    }

    fn rebuild(&mut self) {
        self.evictions = 0;
        self.origin = self.history.front().map_or(self.origin, |&(t, _)| t);
        self.sums = TrendSums::default();
        let pairs: Vec<_> = self.history.drain(..).collect();
        for (t, r) in pairs {
            self.add(t, r);
        }
    }

    /// Appends `(t, r)`, evicting the oldest pairs beyond the window.
    pub fn update(&mut self, class: usize, t: u64, r: f64) -> Result<()> {
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(Error::Sequencing { class, t, last });
            }
        }
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!(
                "reconstruction error must be finite and non-negative, got {r}"
            )));
        }
        self.last_t = Some(t);
        self.add(t, r);
        while self.history.len() > self.window {
            self.evict_oldest();
        }
        Ok(())
    }

    /// Least-squares slope of `R` against `t`; `None` when fewer than two
    /// pairs are retained or all retained times coincide.
    pub fn slope(&self) -> Option<f64> {
        let n = self.history.len();
        if n < 2 {
            return None;
        }
        let n = n as f64;
        let s = &self.sums;
        let denom = n * s.t2 - s.t * s.t;
        if denom <= f64::EPSILON * n * s.t2 {
            return None;
        }
        Some((n * s.tr - s.t * s.r) / denom)
    }

    /// One ADWIN step over the retained errors. Splits are checked at
    /// exponentially spaced boundaries counted from the newest pair.
    pub fn adapt_window(&mut self, cfg: &TrendConfig) -> WindowChange {
        match find_cut(&self.history, cfg) {
            Some(cut) => {
                for _ in 0..cut.dropped {
                    self.evict_oldest();
                }
                // Shrinking may expose a further cut in what remains.
                let mut dropped = cut.dropped;
                while let Some(next) = find_cut(&self.history, cfg) {
                    for _ in 0..next.dropped {
                        self.evict_oldest();
                    }
                    dropped += next.dropped;
                }
                self.window = self.history.len().max(cfg.min_window);
                WindowChange::Shrunk {
                    dropped,
                    old_mean: cut.old_mean,
                    new_mean: cut.new_mean,
                }
            }
            None if self.window < cfg.max_window => {
                self.window += 1;
                WindowChange::Grew
            }
            None => WindowChange::Unchanged,
        }
    }

    pub fn reset(&mut self, cfg: &TrendConfig) {
        let last_t = self.last_t;
        *self = Self::new(cfg.min_window);
        self.last_t = last_t;
    }
}

struct Cut {
    dropped: usize,
    old_mean: f64,
    new_mean: f64,
}

/// Sizes of the newer sub-window tried for a split: 1, 2, 3, 4, 6, 8, 12, ...
fn split_sizes(max: usize) -> impl Iterator<Item = usize> {
    let mut p = 1usize;
    let mut half = false;
    std::iter::from_fn(move || {
        let n = if half { p + p / 2 } else { p };
        if half {
            p *= 2;
        }
        half = !half;
        Some(n)
    })
    .filter(|&n| n >= 1)
    .scan(0usize, |last, n| {
        let out = (n > *last).then_some(n);
        *last = n.max(*last);
        Some(out)
    })
    .flatten()
    .take_while(move |&n| n <= max)
}

/// Cut for the difference of sub-window means: a two-sided Student-t
/// bound `t⁻¹(1 − δ/(2n); n − 2) · σ̂ · sqrt(1/n_old + 1/n_new)`, with `σ̂` the
/// pooled within-sub-window standard deviation. Splitting `δ` over the `n`
/// window length keeps the per-step false-cut rate near `δ/n` as ADWIN does,
/// while the t quantile accounts for `σ̂` being estimated from few points.
pub fn cut_threshold(pooled_sd: f64, n_old: usize, n_new: usize, delta: f64) -> f64 {
    let n = n_old + n_new;
    let q = t_quantile(1.0 - delta / (2.0 * n as f64), (n.max(3) - 2) as f64);
    q * pooled_sd * (1.0 / n_old as f64 + 1.0 / n_new as f64).sqrt()
}

fn t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(p))
        .unwrap_or(f64::INFINITY)
}

fn find_cut(history: &VecDeque<(u64, f64)>, cfg: &TrendConfig) -> Option<Cut> {
    let n = history.len();
    if n < cfg.min_old + 1 {
        return None;
    }
    // Prefix sums over errors, oldest first.
    let mut s1 = Vec::with_capacity(n + 1);
    let mut s2 = Vec::with_capacity(n + 1);
    s1.push(0.0);
    s2.push(0.0);
    for &(_, r) in history {
        s1.push(s1.last().unwrap() + r);
        s2.push(s2.last().unwrap() + r * r);
    }
    let total_mean = s1[n] / n as f64;
    let sd_floor = cfg.min_relative_sd * total_mean.abs();
    let mut best: Option<Cut> = None;
    for n_new in split_sizes(n - cfg.min_old) {
        let n_old = n - n_new;
        let (a1, a2) = (s1[n_old], s2[n_old]);
        let (b1, b2) = (s1[n] - a1, s2[n] - a2);
        let m_old = a1 / n_old as f64;
        let m_new = b1 / n_new as f64;
        let ss = (a2 - a1 * m_old).max(0.0) + (b2 - b1 * m_new).max(0.0);
        let sd = (ss / (n - 2) as f64).sqrt().max(sd_floor).max(1e-12);
        if (m_new - m_old).abs() > cut_threshold(sd, n_old, n_new, cfg.delta) {
            // Keep the largest newer part that still differs.
            best = Some(Cut {
                dropped: n_old,
                old_mean: m_old,
                new_mean: m_new,
            });
        }
    }
    best
}

/// Per-class trend state plus the recent series of slopes used by the
/// causality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendTracker {
    config: TrendConfig,
    classes: Vec<ClassTrend>,
    series: Vec<VecDeque<f64>>,
    series_len: usize,
}

impl TrendTracker {
    pub fn new(classes: usize, config: TrendConfig, series_len: usize) -> Result<Self> {
        config.validate()?;
        if series_len < 2 {
            return Err(Error::Config("trend series length must be >= 2".into()));
        }
        Ok(Self {
            classes: vec![ClassTrend::new(config.min_window); classes],
            series: vec![VecDeque::with_capacity(series_len); classes],
            config,
            series_len,
        })
    }

    pub fn config(&self) -> &TrendConfig {
        &self.config
    }

    pub fn class(&self, m: usize) -> &ClassTrend {
        &self.classes[m]
    }

    pub fn classes(&self) -> usize {
        self.classes.len()
    }

    pub fn update_trend(&mut self, m: usize, t: u64, r: f64) -> Result<()> {
        self.check_class(m)?;
        self.classes[m].update(m, t, r)
    }

    pub fn trend_slope(&self, m: usize) -> Option<f64> {
        self.classes.get(m)?.slope()
    }

    pub fn adaptive_window(&mut self, m: usize) -> Result<WindowChange> {
        self.check_class(m)?;
        Ok(self.classes[m].adapt_window(&self.config))
    }

    /// Appends a slope to class `m`'s series, keeping the newest
    /// `series_len` values.
    pub fn push_slope(&mut self, m: usize, q: f64) {
        let s = &mut self.series[m];
        if s.len() == self.series_len {
            s.pop_front();
        }
        s.push_back(q);
    }

    pub fn trend_series(&self, m: usize) -> Vec<f64> {
        self.series[m].iter().copied().collect()
    }

    pub fn series_full(&self, m: usize) -> bool {
        self.series[m].len() == self.series_len
    }

    pub fn reset_class(&mut self, m: usize) {
        self.classes[m].reset(&self.config);
        self.series[m].clear();
    }

    fn check_class(&self, m: usize) -> Result<()> {
        if m < self.classes.len() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "class {m} out of range for {} classes",
                self.classes.len()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn tracker() -> ClassTrend {
        ClassTrend::new(10)
    }

    #[test]
    fn hand_sums() {
        let mut c = tracker();
        for t in 1..=3 {
            c.update(0, t, t as f64).unwrap();
        }
        assert_eq!(c.origin(), 0);
        let s = c.sums();
        assert_eq!((s.tr, s.t, s.r, s.t2), (14.0, 6.0, 6.0, 14.0));
        assert_eq!(c.slope(), Some(1.0));
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let mut c = tracker();
        for t in 1..=3 {
            c.update(0, t, 5.0).unwrap();
        }
        assert_eq!(c.slope(), Some(0.0));
    }

    #[test]
    fn slope_needs_two_points() {
        let mut c = tracker();
        assert_eq!(c.slope(), None);
        c.update(0, 4, 1.0).unwrap();
        assert_eq!(c.slope(), None);
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let mut c = tracker();
        c.update(2, 5, 1.0).unwrap();
        let err = c.update(2, 5, 1.0).unwrap_err();
        assert!(matches!(err, Error::Sequencing { class: 2, t: 5, last: 5 }));
        assert!(c.update(2, 3, 1.0).is_err());
    }

    #[test]
    fn window_evicts_oldest() {
        let mut c = ClassTrend::new(3);
        for t in 1..=5 {
            c.update(0, t, (t * t) as f64).unwrap();
        }
        let kept: Vec<_> = c.history().collect();
        assert_eq!(kept, vec![(3, 9.0), (4, 16.0), (5, 25.0)]);
        assert_eq!(c.effective_count(), 3);
        // slope of (3,9),(4,16),(5,25) is 8
        assert!((c.slope().unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn effective_count_tracks_window() {
        let mut c = ClassTrend::new(4);
        for t in 1..=10u64 {
            c.update(0, t, 1.0).unwrap();
            assert_eq!(c.effective_count(), (t as usize).min(4));
        }
    }

    #[test]
    fn split_sizes_are_increasing() {
        let s: Vec<_> = split_sizes(20).collect();
        assert_eq!(s, vec![1, 2, 3, 4, 6, 8, 12, 16]);
    }

    #[test]
    fn cut_threshold_matches_formula() {
        // t quantile 1 - 0.002/40 at 18 df is 4.965706285291615.
        let eps = cut_threshold(0.5, 10, 10, 0.002);
        assert!((eps - 4.965706285291615 * 0.5 * 0.2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn equal_means_never_shrink() {
        let cfg = TrendConfig::default();
        let mut c = ClassTrend::new(cfg.min_window);
        for t in 0..50 {
            c.update(0, t, 0.7).unwrap();
            let w = c.window();
            let change = c.adapt_window(&cfg);
            assert!(matches!(change, WindowChange::Grew | WindowChange::Unchanged));
            assert!(c.window() == w || c.window() == w + 1);
        }
    }

    #[test]
    fn window_is_capped() {
        let cfg = TrendConfig {
            max_window: 12,
            ..Default::default()
        };
        let mut c = ClassTrend::new(cfg.min_window);
        for t in 0..40 {
            c.update(0, t, 0.3).unwrap();
            c.adapt_window(&cfg);
        }
        assert_eq!(c.window(), 12);
        assert_eq!(c.effective_count(), 12);
        assert_eq!(c.adapt_window(&cfg), WindowChange::Unchanged);
    }

    #[test]
    fn stationary_shrink_rate_is_bounded() {
        // Monte-Carlo over 1000 seeds of 100 i.i.d. updates.
        let cfg = TrendConfig::default();
        let noise = Normal::new(1.0, 0.1).unwrap();
        let mut runs_with_shrink = 0;
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = ClassTrend::new(cfg.min_window);
            let mut shrunk = false;
            for t in 0..100 {
                c.update(0, t, noise.sample(&mut rng)).unwrap();
                if matches!(c.adapt_window(&cfg), WindowChange::Shrunk { .. }) {
                    shrunk = true;
                }
            }
            runs_with_shrink += shrunk as usize;
        }
        let rate = runs_with_shrink as f64 / 1000.0;
        assert!(rate <= cfg.delta * 100.0, "shrink rate {rate}");
    }

    #[test]
    fn step_change_is_cut_quickly() {
        let cfg = TrendConfig::default();
        let sd = 0.05;
        let noise = Normal::new(0.0, sd).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut c = ClassTrend::new(cfg.min_window);
            for t in 0..60 {
                c.update(0, t, 1.0 + noise.sample(&mut rng)).unwrap();
                c.adapt_window(&cfg);
            }
            let mut cut_at = None;
            for k in 0..5 {
                c.update(0, 60 + k, 1.0 + 10.0 * sd + noise.sample(&mut rng)).unwrap();
                if c.adapt_window(&cfg).is_increase() {
                    cut_at = Some(k);
                    break;
                }
            }
            assert!(cut_at.is_some(), "seed {seed}: no cut within 5 updates");
        }
    }

    #[test]
    fn sums_match_brute_force_after_cuts() {
        let cfg = TrendConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut c = ClassTrend::new(cfg.min_window);
        let mut t = 0;
        for i in 0..3000 {
            t += rng.random_range(1..4);
            let level = if (i / 300) % 2 == 0 { 1.0 } else { 3.0 };
            c.update(0, t, level + rng.random::<f64>() * 0.1).unwrap();
            c.adapt_window(&cfg);
            let o = c.origin();
            let (mut tr, mut ts, mut r, mut t2) = (0.0, 0.0, 0.0, 0.0);
            for (ti, ri) in c.history() {
                let x = (ti - o) as f64;
                tr += x * ri;
                ts += x;
                r += ri;
                t2 += x * x;
            }
            let s = c.sums();
            for (a, b) in [(s.tr, tr), (s.t, ts), (s.r, r), (s.t2, t2)] {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn tracker_series_and_reset() {
        let mut tr = TrendTracker::new(2, TrendConfig::default(), 4).unwrap();
        for i in 0..6 {
            tr.push_slope(1, i as f64);
        }
        assert_eq!(tr.trend_series(1), vec![2.0, 3.0, 4.0, 5.0]);
        assert!(tr.series_full(1));
        assert!(!tr.series_full(0));
        tr.update_trend(1, 10, 0.5).unwrap();
        tr.reset_class(1);
        assert!(tr.trend_series(1).is_empty());
        assert_eq!(tr.class(1).effective_count(), 0);
        // Sequencing survives a reset.
        assert!(tr.update_trend(1, 10, 0.5).is_err());
        assert!(tr.update_trend(1, 11, 0.5).is_ok());
        assert!(tr.update_trend(2, 11, 0.5).is_err());
    }
}
