// SPDX-License-Identifier: MIT OR Apache-2.0

//! Threshold-based labelling: operating modes, shutdowns and static stretches.

use crate::error::{Error, Result};
use crate::model::{merge_adjacent, Duration, GriddedSeries, Segment, SegmentLabel, Timestamp};

/// Assigns each present value the mode `k = #{thresholds < value}` and returns
/// maximal segments tiling the series. Segments shorter than `min_mode_duration`
/// are merged into their longer neighbour (ties go to the earlier one).
pub fn partition_modes(
    s: &GriddedSeries,
    thresholds: &[f64],
    min_mode_duration: Duration,
) -> Result<Vec<Segment>> {
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::validation("mode thresholds must be finite"));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("mode thresholds must be strictly ascending"));
    }
    if thresholds.len() > u8::MAX as usize {
        return Err(Error::validation("at most 255 mode thresholds"));
    }
    let mode_of = |v: f64| thresholds.iter().filter(|&&t| t < v).count() as u8;

    // (first index, mode) per run of equal modes over present values
    let mut runs: Vec<(usize, u8)> = Vec::new();
    for (k, v) in s.values().iter().enumerate() {
        let Some(v) = v else { continue };
        let m = mode_of(*v);
        if runs.last().is_none_or(|&(_, last)| last != m) {
            runs.push((k, m));
        }
    }
    if runs.is_empty() {
        return Ok(Vec::new());
    }
    let mut segs: Vec<Segment> = runs
        .iter()
        .enumerate()
        .map(|(i, &(k, m))| {
            let start = if i == 0 { s.start() } else { s.time_at(k) };
            let end = runs.get(i + 1).map_or(s.end(), |&(next, _)| s.time_at(next));
            Segment {
                start,
                end,
                label: SegmentLabel::Mode(m),
                evidence: None,
            }
        })
        .collect();
    debounce(&mut segs, min_mode_duration);
    Ok(segs)
}

/// Repeatedly folds the shortest too-short segment into its longer neighbour.
fn debounce(segs: &mut Vec<Segment>, min_duration: Duration) {
    loop {
        if segs.len() < 2 {
            return;
        }
        let shortest = segs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.duration() < min_duration)
            .min_by_key(|(i, s)| (s.duration(), *i))
            .map(|(i, _)| i);
        let Some(i) = shortest else { return };
        let prev = i.checked_sub(1).map(|j| segs[j].duration());
        let next = segs.get(i + 1).map(|s| s.duration());
        let into_prev = match (prev, next) {
            (Some(p), Some(n)) => p >= n,
            (Some(_), None) => true,
            _ => false,
        };
        if into_prev {
            segs[i - 1].end = segs[i].end;
        } else {
            segs[i + 1].start = segs[i].start;
        }
        segs.remove(i);
        *segs = merge_adjacent(std::mem::take(segs));
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShutdownScan {
    pub shutdowns: Vec<Segment>,
    /// Sub-threshold runs too short to be a shutdown; kept for review, never dropped.
    pub anomalies: Vec<Segment>,
}

/// Maximal runs below `threshold`: at least `min_duration` long they are
/// shutdowns, otherwise anomalies. Absent values end a run.
pub fn detect_shutdown(
    s: &GriddedSeries,
    threshold: f64,
    min_duration: Duration,
) -> Result<ShutdownScan> {
    if min_duration < s.interval() {
        return Err(Error::validation(format!(
            "min_duration {min_duration} shorter than grid interval {}",
            s.interval()
        )));
    }
    let mut scan = ShutdownScan::default();
    for (first, last) in runs_where(s, |v| v < threshold) {
        let seg = span(s, first, last, SegmentLabel::Shutdown);
        if seg.duration() >= min_duration {
            scan.shutdowns.push(seg);
        } else {
            scan.anomalies.push(Segment {
                label: SegmentLabel::Anomaly,
                ..seg
            });
        }
    }
    Ok(scan)
}

/// Greedy maximal runs whose range stays within `noise_band` and that last at
/// least `min_duration`. Absent values neither break nor extend the range.
pub fn detect_static(
    s: &GriddedSeries,
    noise_band: f64,
    min_duration: Duration,
) -> Result<Vec<Segment>> {
    if noise_band.is_nan() || noise_band < 0.0 {
        return Err(Error::validation("noise_band must be non-negative"));
    }
    let mut out = Vec::new();
    // (first index, last index, min, max)
    let mut run: Option<(usize, usize, f64, f64)> = None;
    let close = |r: (usize, usize, f64, f64), out: &mut Vec<Segment>| {
        let seg = span(s, r.0, r.1, SegmentLabel::Static).with_evidence(r.3 - r.2);
        if seg.duration() >= min_duration {
            out.push(seg);
        }
    };
    for (k, v) in s.values().iter().enumerate() {
        let Some(v) = *v else { continue };
        run = match run {
            None => Some((k, k, v, v)),
            Some((first, _, lo, hi)) => {
                let (lo2, hi2) = (lo.min(v), hi.max(v));
                if hi2 - lo2 <= noise_band {
                    Some((first, k, lo2, hi2))
                } else {
                    close(run.unwrap(), &mut out);
                    Some((k, k, v, v))
                }
            }
        };
    }
    if let Some(r) = run {
        close(r, &mut out);
    }
    Ok(out)
}

fn runs_where(s: &GriddedSeries, pred: impl Fn(f64) -> bool) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, usize)> = None;
    for (k, v) in s.values().iter().enumerate() {
        match v {
            Some(x) if pred(*x) => {
                current = Some(current.map_or((k, k), |(f, _)| (f, k)));
            }
            _ => {
                if let Some(r) = current.take() {
                    runs.push(r);
                }
            }
        }
    }
    runs.extend(current);
    runs
}

fn span(s: &GriddedSeries, first: usize, last: usize, label: SegmentLabel) -> Segment {
    let start: Timestamp = s.time_at(first);
    Segment {
        start,
        end: s.time_at(last + 1),
        label,
        evidence: None,
    }
}
