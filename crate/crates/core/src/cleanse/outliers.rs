// SPDX-License-Identifier: MIT OR Apache-2.0

//! k-sigma outlier tests, global and over a trailing window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries};
use crate::stats::SeriesStats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierParams {
    /// Sigma multiplier.
    pub k: f64,
    /// Trailing window; `None` selects the global test.
    pub window: Option<Duration>,
    pub min_window_points: usize,
}

impl Default for OutlierParams {
    fn default() -> Self {
        OutlierParams {
            k: 3.0,
            window: None,
            min_window_points: 8,
        }
    }
}

impl OutlierParams {
    pub fn global(k: f64) -> Self {
        OutlierParams {
            k,
            ..Self::default()
        }
    }

    pub fn moving(k: f64, window: Duration) -> Self {
        OutlierParams {
            k,
            window: Some(window),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::validation(format!("sigma multiplier k={} must be positive", self.k)));
        }
        if self.min_window_points < 8 {
            return Err(Error::validation("min_window_points must be at least 8"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalOutliers {
    pub indices: Vec<usize>,
    pub stats: SeriesStats,
    /// Set when the series has zero spread and nothing can be flagged.
    pub warning: Option<String>,
}

/// Flags indices with `|x - mean| > k * sigma` over all present values
/// (population sigma, strict inequality).
pub fn detect_outliers_global(s: &GriddedSeries, p: &OutlierParams) -> Result<GlobalOutliers> {
    p.validate()?;
    if p.window.is_some() {
        return Err(Error::validation(
            "global outlier test called with a window; use detect_outliers_moving",
        ));
    }
    let present = s.values().iter().flatten().copied();
    let stats = SeriesStats::from_values(present).filter(|st| st.n >= p.min_window_points);
    let Some(stats) = stats else {
        return Err(Error::not_enough(format!(
            "tag {}: outlier test needs {} present values, found {}",
            s.tag(),
            p.min_window_points,
            s.present_count()
        )));
    };
    if stats.std_dev == 0.0 {
        let msg = format!("tag {}: constant series, no outliers can be flagged", s.tag());
        log::warn!("{msg}");
        return Ok(GlobalOutliers {
            indices: Vec::new(),
            stats,
            warning: Some(msg),
        });
    }
    let limit = p.k * stats.std_dev;
    let indices = s
        .values()
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|x| (x - stats.mean).abs() > limit).map(|_| i))
        .collect();
    Ok(GlobalOutliers {
        indices,
        stats,
        warning: None,
    })
}

/// Flags index `i` when it deviates by more than `k * sigma` from the statistics
/// of the preceding window (the tested point itself excluded). Points whose
/// window holds fewer than `min_window_points` present values are never flagged.
pub fn detect_outliers_moving(s: &GriddedSeries, p: &OutlierParams) -> Result<Vec<usize>> {
    p.validate()?;
    let window = p
        .window
        .ok_or_else(|| Error::validation("moving outlier test needs a window"))?;
    if window < s.interval() * p.min_window_points as i64 {
        return Err(Error::validation(format!(
            "window {window} shorter than {} grid intervals",
            p.min_window_points
        )));
    }
    let w = window.steps_of(s.interval()) as usize;
    let values = s.values();
    let mut flagged = Vec::new();
    for (i, x) in values.iter().enumerate() {
        let Some(x) = *x else { continue };
        let trailing = &values[i.saturating_sub(w)..i];
        let Some(st) = SeriesStats::from_values(trailing.iter().flatten().copied()) else {
            continue;
        };
        if st.n < p.min_window_points {
            continue;
        }
        if (x - st.mean).abs() > p.k * st.std_dev {
            flagged.push(i);
        }
    }
    Ok(flagged)
}
