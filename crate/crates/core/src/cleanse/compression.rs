// SPDX-License-Identifier: MIT OR Apache-2.0

//! Heuristics for archives that went through exception/compression filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, RawSeries};

pub const MIN_COMPRESSION_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionParams {
    /// `archival_ratio` above this marks the archive as suspected.
    pub ratio_threshold: f64,
    /// `linear_fraction` above this marks the archive as suspected.
    pub linear_threshold: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for CompressionParams {
    fn default() -> Self {
        CompressionParams {
            ratio_threshold: 3.0,
            linear_threshold: 0.8,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionFinding {
    /// Mean archived spacing over the nominal scan interval.
    pub archival_ratio: f64,
    /// Share of interior samples lying on the chord of their neighbours.
    pub linear_fraction: f64,
    pub suspected: bool,
}

pub fn detect_compression(
    raw: &RawSeries,
    nominal_scan: Duration,
    p: &CompressionParams,
) -> Result<CompressionFinding> {
    if !nominal_scan.is_positive() {
        return Err(Error::validation("nominal scan interval must be positive"));
    }
    let n = raw.len();
    if n < MIN_COMPRESSION_SAMPLES {
        return Err(Error::not_enough(format!(
            "tag {}: compression check needs {MIN_COMPRESSION_SAMPLES} samples, found {n}",
            raw.tag()
        )));
    }
    let samples = raw.samples();
    let span = samples[n - 1].time - samples[0].time;
    let archival_ratio = span.as_secs_f64() / (n - 1) as f64 / nominal_scan.as_secs_f64();

    let mut considered = 0usize;
    let mut on_chord = 0usize;
    for w in samples.windows(3) {
        let (Some(v0), Some(v1), Some(v2)) = (w[0].value, w[1].value, w[2].value) else {
            continue;
        };
        considered += 1;
        let frac = (w[1].time - w[0].time).as_micros() as f64
            / (w[2].time - w[0].time).as_micros() as f64;
        let chord = v0 + (v2 - v0) * frac;
        if (v1 - chord).abs() <= p.rel_tol * v1.abs() + p.abs_tol {
            on_chord += 1;
        }
    }
    let linear_fraction = if considered == 0 {
        0.0
    } else {
        on_chord as f64 / considered as f64
    };
    Ok(CompressionFinding {
        archival_ratio,
        linear_fraction,
        suspected: archival_ratio > p.ratio_threshold || linear_fraction > p.linear_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;

    fn series(n: i64, step_s: i64, f: impl Fn(i64) -> f64) -> RawSeries {
        let pts: Vec<_> = (0..n).map(|i| (Timestamp::from_secs(i * step_s), f(i))).collect();
        RawSeries::from_points("A", &pts).unwrap()
    }

    #[test]
    fn uniform_archive_not_suspected() {
        let s = series(200, 5, |i| (i as f64 * 0.37).sin());
        let f = detect_compression(&s, Duration::from_secs(5), &CompressionParams::default())
            .unwrap();
        assert_eq!(f.archival_ratio, 1.0);
        assert!(f.linear_fraction < 0.1);
        assert!(!f.suspected);
    }

    #[test]
    fn sparse_archive_suspected_by_ratio() {
        let s = series(200, 50, |i| (i as f64 * 0.37).sin());
        let f = detect_compression(&s, Duration::from_secs(5), &CompressionParams::default())
            .unwrap();
        assert_eq!(f.archival_ratio, 10.0);
        assert!(f.suspected);
    }

    #[test]
    fn straight_line_is_fully_linear() {
        let s = series(100, 5, |i| 3.0 + 0.25 * i as f64);
        let f = detect_compression(&s, Duration::from_secs(5), &CompressionParams::default())
            .unwrap();
        assert_eq!(f.linear_fraction, 1.0);
        assert!(f.suspected);
    }

    #[test]
    fn too_short() {
        let s = series(49, 5, |_| 0.0);
        assert!(matches!(
            detect_compression(&s, Duration::from_secs(5), &CompressionParams::default()),
            Err(Error::NotEnoughData(_))
        ));
    }
}
