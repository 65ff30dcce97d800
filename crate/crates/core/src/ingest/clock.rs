// SPDX-License-Identifier: MIT OR Apache-2.0

//! Clock offset between two data sources, estimated from one shared tag pair.

use crate::error::{Error, Result};
use crate::ingest::grid::{detect_resolution, grid_n};
use crate::ingest::{ClockCorrection, Dataset};
use crate::model::{Duration, GridMethod, RawSeries};
use crate::stats::lagged_pearson;

#[derive(Clone, Debug, PartialEq)]
pub struct ClockOffsetOptions {
    /// Common grid both series are resampled onto.
    pub interval: Duration,
    /// Peak |correlation| below this marks the estimate low-confidence.
    pub confidence_floor: f64,
    /// Interpolation gap limit; defaults to 4x the coarser archive resolution.
    pub max_gap: Option<Duration>,
}

impl ClockOffsetOptions {
    pub fn new(interval: Duration) -> Self {
        ClockOffsetOptions {
            interval,
            confidence_floor: 0.5,
            max_gap: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockOffsetEstimate {
    /// How far `b`'s clock runs ahead of `a`'s. Apply `-offset` to `b`'s source to correct.
    pub offset: Duration,
    pub lag_steps: i64,
    pub confidence: f64,
    pub low_confidence: bool,
}

/// Lag in `[-max_offset, max_offset]` maximising |corr(a(t), b(t + lag))|.
pub fn estimate_clock_offset(
    a: &RawSeries,
    b: &RawSeries,
    max_offset: Duration,
    opts: &ClockOffsetOptions,
) -> Result<ClockOffsetEstimate> {
    let interval = opts.interval;
    if !interval.is_positive() {
        return Err(Error::validation("clock grid interval must be positive"));
    }
    let (Some(a0), Some(a1), Some(b0), Some(b1)) =
        (a.first_time(), a.last_time(), b.first_time(), b.last_time())
    else {
        return Err(Error::not_enough("clock offset needs two non-empty series"));
    };
    let overlap = a1.min(b1) - a0.max(b0);
    if !overlap.is_positive() {
        return Err(Error::not_enough(format!(
            "{} and {} do not overlap in time",
            a.tag(),
            b.tag()
        )));
    }
    if overlap < max_offset.abs() * 10 {
        return Err(Error::not_enough(format!(
            "overlap {overlap} is shorter than 10x max offset {max_offset}"
        )));
    }
    let max_gap = match opts.max_gap {
        Some(g) => g,
        None => {
            let coarse = detect_resolution(a)?
                .dominant
                .max(detect_resolution(b)?.dominant);
            (coarse * 4).max(interval)
        }
    };
    let start = a0.min(b0);
    let len = (a1.max(b1) - start).steps_of(interval) as usize + 1;
    let ga = grid_n(a, start, interval, len, GridMethod::Linear, max_gap)?;
    let gb = grid_n(b, start, interval, len, GridMethod::Linear, max_gap)?;

    let max_lag = max_offset.abs().steps_of(interval);
    let mut best: Option<(i64, f64)> = None;
    for step in 0..=max_lag {
        let candidates: &[i64] = if step == 0 { &[0] } else { &[-step, step] };
        for &lag in candidates {
            if let Some(r) = lagged_pearson(ga.values(), gb.values(), lag) {
                if best.is_none_or(|(_, b)| r.abs() > b.abs()) {
                    best = Some((lag, r));
                }
            }
        }
    }
    let (lag, r) = best.ok_or_else(|| {
        Error::AllAbsent(format!("{} and {} share no co-present grid points", a.tag(), b.tag()))
    })?;
    let confidence = r.abs();
    let low_confidence = confidence < opts.confidence_floor;
    if low_confidence {
        log::warn!(
            "clock offset between {} and {} is low-confidence ({confidence:.3})",
            a.tag(),
            b.tag()
        );
    }
    Ok(ClockOffsetEstimate {
        offset: interval * lag,
        lag_steps: lag,
        confidence,
        low_confidence,
    })
}

/// Shifts every series archived by `source` by `offset` and records the correction.
pub fn apply_clock_offset(d: &Dataset, source: &str, offset: Duration) -> Result<Dataset> {
    if d.source(source).is_none() {
        return Err(Error::validation(format!("unknown source {source:?}")));
    }
    let mut out = d.clone();
    let tags = d.tags_of_source(source);
    let series = out.series_mut();
    for tag in tags {
        if let Some(s) = series.get_mut(&tag) {
            *s = s.shifted(offset);
        }
    }
    out.push_correction(ClockCorrection {
        source: source.to_owned(),
        offset,
    });
    Ok(out)
}
