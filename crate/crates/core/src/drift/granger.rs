//! Granger-causality test between the older and newer halves of a trend
//! series, on first differences.
//!
//! With `x` the differenced older half and `y` the differenced newer half
//! (aligned index by index), two least-squares models are fit for
//! `y[i]`, `i = p..len`:
//!
//! * restricted: intercept + `y[i-1..=i-p]`
//! * unrestricted: the above + `x[i-1..=i-p]`
//!
//! and `F = ((RSS_r − RSS_u) / p) / (RSS_u / (n − 2p − 1))`. A large p-value
//! means the older trend does not help forecast the newer one, which is read
//! as a drift signal.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GrangerOutcome {
    /// Too little data or a degenerate (zero-variance / collinear) design.
    Insufficient,
    Tested {
        statistic: f64,
        p_value: f64,
        drift: bool,
    },
}

impl GrangerOutcome {
    pub fn is_drift(&self) -> bool {
        matches!(self, GrangerOutcome::Tested { drift: true, .. })
    }
}

/// Residual sum of squares of the least-squares fit of `y` on the columns of
/// `x` (row-major, `rows x cols`). `None` when the design is rank deficient.
pub fn ols_rss(x: &[f64], cols: usize, y: &[f64]) -> Option<f64> {
    let rows = y.len();
    if cols == 0 || rows <= cols || x.len() != rows * cols {
        return None;
    }
    // Column-major working copy.
    let mut a: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| x[i * cols + j]).collect())
        .collect();
    let mut b = y.to_vec();
    let scale = a
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for k in 0..cols {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * scale * (rows as f64).sqrt() {
            return None;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let s: f64 = v.iter().zip(&col[k..]).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let s: f64 = v.iter().zip(&b[k..]).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c -= s * vi;
        }
    }
    Some(b[cols..].iter().map(|r| r * r).sum())
}

fn first_differences(xs: &[f64]) -> Vec<f64> {
    xs.windows(2).map(|w| w[1] - w[0]).collect()
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// F statistic and p-value of the causality test from the older series `x`
/// to the newer series `y` (both already differenced), or `None` when the
/// design is degenerate.
pub fn granger_f_test(x: &[f64], y: &[f64], lag: usize) -> Option<(f64, f64)> {
    let len = x.len().min(y.len());
    if lag == 0 || len <= lag {
        return None;
    }
    let n_obs = len - lag;
    if n_obs < 2 * lag + 2 {
        return None;
    }
    let df2 = n_obs - 2 * lag - 1;
    let cols_r = 1 + lag;
    let cols_u = 1 + 2 * lag;
    let mut xr = Vec::with_capacity(n_obs * cols_r);
    let mut xu = Vec::with_capacity(n_obs * cols_u);
    let mut target = Vec::with_capacity(n_obs);
    for i in lag..len {
        target.push(y[i]);
        xr.push(1.0);
        xu.push(1.0);
        for l in 1..=lag {
            xr.push(y[i - l]);
            xu.push(y[i - l]);
        }
        for l in 1..=lag {
            xu.push(x[i - l]);
        }
    }
    let rss_r = ols_rss(&xr, cols_r, &target)?;
    let rss_u = ols_rss(&xu, cols_u, &target)?;
    let tss: f64 = {
        let m = target.iter().sum::<f64>() / n_obs as f64;
        target.iter().map(|t| (t - m).powi(2)).sum()
    };
    if rss_u <= 1e-14 * tss.max(f64::MIN_POSITIVE) {
        // Exact fit: the older series explains the newer one completely.
        return Some((f64::INFINITY, 0.0));
    }
    let stat = ((rss_r - rss_u).max(0.0) / lag as f64) / (rss_u / df2 as f64);
    let dist = FisherSnedecor::new(lag as f64, df2 as f64).ok()?;
    Some((stat, dist.sf(stat)))
}

/// Splits `series` into older/newer halves (dropping the oldest value when
/// the length is odd), differences both, and runs [`granger_f_test`].
/// Drift is signaled when the p-value exceeds `alpha`.
pub fn granger_drift_test(series: &[f64], lag: usize, alpha: f64) -> Result<GrangerOutcome> {
    if lag == 0 {
        return Err(Error::Config("granger lag must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if series.len() < 2 * (lag + 2) || series.iter().any(|x| !x.is_finite()) {
        return Ok(GrangerOutcome::Insufficient);
    }
    let half = series.len() / 2;
    let start = series.len() - 2 * half;
    let older = first_differences(&series[start..start + half]);
    let newer = first_differences(&series[start + half..]);
    if variance(&older) <= 0.0 || variance(&newer) <= 0.0 {
        return Ok(GrangerOutcome::Insufficient);
    }
    Ok(match granger_f_test(&older, &newer, lag) {
        None => GrangerOutcome::Insufficient,
        Some((statistic, p_value)) => GrangerOutcome::Tested {
            statistic,
            p_value,
            drift: p_value > alpha,
        },
    })
}
