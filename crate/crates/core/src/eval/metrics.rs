//! Prequential window and the skew-insensitive metrics computed over it.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub scores: Vec<f64>,
    pub label: usize,
    pub predicted: usize,
}

/// Ring of the most recent `(scores, label, prediction)` triples.
#[derive(Debug, Clone)]
pub struct PrequentialWindow {
    classes: usize,
    capacity: usize,
    items: VecDeque<Outcome>,
}

impl PrequentialWindow {
    pub fn new(classes: usize, capacity: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::Config("window needs at least two classes".into()));
        }
        if capacity == 0 {
            return Err(Error::Config("window capacity must be >= 1".into()));
        }
        Ok(Self {
            classes,
            capacity,
            items: VecDeque::with_capacity(capacity),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Outcome> {
        self.items.iter()
    }

    pub fn push(&mut self, outcome: Outcome) -> Result<()> {
        if outcome.scores.len() != self.classes || outcome.label >= self.classes || outcome.predicted >= self.classes {
            return Err(Error::Domain(format!(
                "outcome does not fit a {}-class window",
                self.classes
            )));
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(outcome);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

/// Probability that a random instance of class `i` has a higher class-`i`
/// score than a random instance of class `j`, ties counting one half.
/// Mann-Whitney on sorted scores.
fn ranking_auc(pos: &mut [f64], neg: &mut [f64]) -> f64 {
    pos.sort_by(|a, b| a.total_cmp(b));
    neg.sort_by(|a, b| a.total_cmp(b));
    let mut wins = 0.0;
    let (mut lo, mut hi) = (0, 0);
    for &p in pos.iter() {
        while lo < neg.len() && neg[lo] < p {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < neg.len() && neg[hi] <= p {
            hi += 1;
        }
        wins += lo as f64 + 0.5 * (hi - lo) as f64;
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Hand-Till multi-class AUC over the classes present in the window:
/// the mean over unordered pairs `(i, k)` of `(A(i|k) + A(k|i)) / 2`, where
/// `A(i|k)` ranks instances of classes `i` and `k` by their class-`i` score.
pub fn pm_auc(window: &PrequentialWindow) -> Result<f64> {
    let z = window.classes();
    let mut by_class: Vec<Vec<&Outcome>> = vec![Vec::new(); z];
    for o in window.iter() {
        by_class[o.label].push(o);
    }
    let present: Vec<usize> = (0..z).filter(|&c| !by_class[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "pmAUC needs two classes in the window, found {}",
            present.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (a, &i) in present.iter().enumerate() {
        for &k in &present[a + 1..] {
            let score = |c: usize, of: usize| -> Vec<f64> { by_class[c].iter().map(|o| o.scores[of]).collect() };
            let a_ik = ranking_auc(&mut score(i, i), &mut score(k, i));
            let a_ki = ranking_auc(&mut score(k, k), &mut score(i, k));
            total += 0.5 * (a_ik + a_ki);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Recall of every class present in the window (`None` for absent ones).
pub fn class_recalls(window: &PrequentialWindow) -> Vec<Option<f64>> {
    let z = window.classes();
    let mut hits = vec![0usize; z];
    let mut seen = vec![0usize; z];
    for o in window.iter() {
        seen[o.label] += 1;
        if o.predicted == o.label {
            hits[o.label] += 1;
        }
    }
    (0..z)
        .map(|c| (seen[c] > 0).then(|| hits[c] as f64 / seen[c] as f64))
        .collect()
}

/// Geometric mean of the recalls of the classes present in the window.
pub fn pm_gm(window: &PrequentialWindow) -> Result<f64> {
    let recalls: Vec<f64> = class_recalls(window).into_iter().flatten().collect();
    geometric_mean(&recalls)
}

/// Geometric mean of `values` in `[0, 1]`; zero if any value is zero.
pub fn geometric_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("pmGM of an empty window".into()));
    }
    if values.iter().any(|&r| r == 0.0) {
        return Ok(0.0);
    }
    let log_mean = values.iter().map(|r| r.ln()).sum::<f64>() / values.len() as f64;
    Ok(log_mean.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(items: &[(&[f64], usize, usize)], classes: usize) -> PrequentialWindow {
        let mut w = PrequentialWindow::new(classes, 1000).unwrap();
        for (s, y, p) in items {
            w.push(Outcome {
                scores: s.to_vec(),
                label: *y,
                predicted: *p,
            })
            .unwrap();
        }
        w
    }

    fn toy() -> PrequentialWindow {
        window(
            &[
                (&[0.8, 0.1, 0.1], 0, 0),
                (&[0.4, 0.35, 0.25], 0, 0),
                (&[0.3, 0.5, 0.2], 1, 1),
                (&[0.5, 0.2, 0.3], 1, 0),
                (&[0.2, 0.3, 0.5], 2, 2),
                (&[0.1, 0.6, 0.3], 2, 1),
            ],
            3,
        )
    }

    #[test]
    fn toy_auc_by_hand() {
        // A(0|1) = A(1|0) = 3/4; A(0|2) = A(2|0) = 1; A(1|2) = 1/4,
        // A(2|1) = 3.5/4 (one tie at 0.3). Mean of pair averages = 37/48.
        assert_eq!(pm_auc(&toy()).unwrap(), 37.0 / 48.0);
    }

    fn brute_force_auc(w: &PrequentialWindow) -> f64 {
        let items: Vec<&Outcome> = w.iter().collect();
        let present: Vec<usize> = (0..w.classes())
            .filter(|&c| items.iter().any(|o| o.label == c))
            .collect();
        let a = |i: usize, k: usize| {
            let (mut wins, mut n) = (0.0, 0.0);
            for p in items.iter().filter(|o| o.label == i) {
                for q in items.iter().filter(|o| o.label == k) {
                    n += 1.0;
                    if p.scores[i] > q.scores[i] {
                        wins += 1.0;
                    } else if p.scores[i] == q.scores[i] {
                        wins += 0.5;
                    }
                }
            }
            wins / n
        };
        let mut total = 0.0;
        let mut pairs = 0.0;
        for (x, &i) in present.iter().enumerate() {
            for &k in &present[x + 1..] {
                total += 0.5 * (a(i, k) + a(k, i));
                pairs += 1.0;
            }
        }
        total / pairs
    }

    #[test]
    fn toy_auc_matches_enumeration() {
        let w = toy();
        assert_eq!(pm_auc(&w).unwrap(), brute_force_auc(&w));
    }

    #[test]
    fn separated_scores_give_one() {
        let w = window(&[(&[1.0, 0.0], 0, 0), (&[0.9, 0.1], 0, 0), (&[0.0, 1.0], 1, 1)], 2);
        assert_eq!(pm_auc(&w).unwrap(), 1.0);
    }

    #[test]
    fn uninformative_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut w = PrequentialWindow::new(2, 10_000).unwrap();
        for i in 0..10_000 {
            let s: f64 = rng.random();
            w.push(Outcome {
                scores: vec![s, 1.0 - s],
                label: i % 2,
                predicted: 0,
            })
            .unwrap();
        }
        assert!((pm_auc(&w).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn single_class_auc_is_undefined() {
        let w = window(&[(&[1.0, 0.0], 0, 0)], 2);
        assert!(matches!(pm_auc(&w), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn gm_examples() {
        let w = window(&[(&[0.0; 2], 0, 0), (&[0.0; 2], 0, 0)], 2);
        assert_eq!(pm_gm(&w).unwrap(), 1.0);
        // Recalls (1.0, 0.25) -> 0.5.
        let mut items: Vec<(&[f64], usize, usize)> = vec![(&[0.0, 0.0], 0, 0)];
        items.extend([(&[0.0, 0.0][..], 1, 1), (&[0.0, 0.0], 1, 0), (&[0.0, 0.0], 1, 0), (&[0.0, 0.0], 1, 0)]);
        assert!((pm_gm(&window(&items, 2)).unwrap() - 0.5).abs() < 1e-12);
        let w = window(&[(&[0.0; 2], 0, 0), (&[0.0; 2], 1, 0)], 2);
        assert_eq!(pm_gm(&w).unwrap(), 0.0);
    }

    #[test]
    fn window_evicts_oldest() {
        let mut w = PrequentialWindow::new(2, 2).unwrap();
        for y in [0, 1, 1] {
            w.push(Outcome {
                scores: vec![0.0, 0.0],
                label: y,
                predicted: y,
            })
            .unwrap();
        }
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|o| o.label == 1));
        assert!(w
            .push(Outcome {
                scores: vec![0.0],
                label: 0,
                predicted: 0
            })
            .is_err());
    }

    fn arb_window() -> impl Strategy<Value = Vec<(Vec<f64>, usize, usize)>> {
        proptest::collection::vec(
            (proptest::collection::vec(-5.0f64..5.0, 3), 0usize..3, 0usize..3),
            2..60,
        )
    }

    fn build(items: &[(Vec<f64>, usize, usize)], f: impl Fn(f64) -> f64) -> PrequentialWindow {
        let mut w = PrequentialWindow::new(3, 1000).unwrap();
        for (s, y, p) in items {
            w.push(Outcome {
                scores: s.iter().map(|&x| f(x)).collect(),
                label: *y,
                predicted: *p,
            })
            .unwrap();
        }
        w
    }

    proptest! {
        #[test]
        fn auc_is_rank_invariant(items in arb_window()) {
            let a = pm_auc(&build(&items, |x| x));
            let b = pm_auc(&build(&items, |x| (x * 0.7).exp() + 3.0));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn auc_matches_brute_force(items in arb_window()) {
            let w = build(&items, |x| (x * 4.0).round() / 4.0);
            if let Ok(a) = pm_auc(&w) {
                prop_assert!((a - brute_force_auc(&w)).abs() < 1e-12);
            }
        }

        #[test]
        fn gm_is_permutation_invariant(items in arb_window(), perm in Just([2usize, 0, 1])) {
            let w = build(&items, |x| x);
            let relabeled: Vec<(Vec<f64>, usize, usize)> = items
                .iter()
                .map(|(s, y, p)| (s.clone(), perm[*y], perm[*p]))
                .collect();
            let v = build(&relabeled, |x| x);
            prop_assert!((pm_gm(&w).unwrap() - pm_gm(&v).unwrap()).abs() < 1e-12);
        }
    }
}
