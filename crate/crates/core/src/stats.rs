// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small numeric helpers shared by the detectors.

use serde::{Deserialize, Serialize};

/// Mean and population standard deviation of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
}

impl SeriesStats {
    /// Two-pass estimate; `None` for an empty input.
    pub fn from_values<I>(values: I) -> Option<Self>
    where
        I: IntoIterator<Item = f64>,
        I::IntoIter: Clone,
    {
        let iter = values.into_iter();
        let (sum, n) = iter.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            return None;
        }
        let mean = sum / n as f64;
        let ss: f64 = iter.map(|v| (v - mean) * (v - mean)).sum();
        Some(SeriesStats {
            mean,
            std_dev: (ss / n as f64).sqrt(),
            n,
        })
    }
}

/// Pearson correlation of paired samples. `None` with fewer than two pairs
/// or when either side has zero variance.
pub fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Co-present pairs `(x[k], y[k + lag])`.
pub fn lagged_pairs(x: &[Option<f64>], y: &[Option<f64>], lag: i64) -> Vec<(f64, f64)> {
    let n = x.len().min(y.len()) as i64;
    let lo = (-lag).max(0);
    let hi = (n - lag).min(n);
    (lo..hi.max(lo))
        .filter_map(|k| {
            let a = x[k as usize]?;
            let b = y[(k + lag) as usize]?;
            Some((a, b))
        })
        .collect()
}

/// Normalised cross-correlation at one lag, mean-removed over co-present pairs.
pub fn lagged_pearson(x: &[Option<f64>], y: &[Option<f64>], lag: i64) -> Option<f64> {
    pearson(&lagged_pairs(x, y, lag))
}

/// Nearest-rank quantile of an already sorted slice, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let q = q.clamp(0.0, 1.0);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn rms(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}
