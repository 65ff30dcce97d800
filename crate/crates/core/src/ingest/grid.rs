// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{Duration, GridMethod, GriddedSeries, RawSeries, Sample, Timestamp};

/// Dominant archive spacing of a raw series.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolution {
    /// Median of successive timestamp differences (lower median for even counts).
    pub dominant: Duration,
    pub histogram: BTreeMap<Duration, usize>,
}

pub fn detect_resolution(s: &RawSeries) -> Result<Resolution> {
    if s.len() < 2 {
        return Err(Error::not_enough(format!(
            "tag {}: resolution needs at least 2 samples, found {}",
            s.tag(),
            s.len()
        )));
    }
    let mut diffs: Vec<Duration> = s
        .samples()
        .windows(2)
        .map(|w| w[1].time - w[0].time)
        .collect();
    let mut histogram = BTreeMap::new();
    for d in &diffs {
        *histogram.entry(*d).or_insert(0) += 1;
    }
    diffs.sort_unstable();
    let dominant = diffs[(diffs.len() - 1) / 2];
    Ok(Resolution {
        dominant,
        histogram,
    })
}

/// Four times the detected resolution, so slow tags are not fabricated at high rates.
pub fn default_max_gap(s: &RawSeries) -> Result<Duration> {
    Ok(detect_resolution(s)?.dominant * 4)
}

/// Grids `s` from `start` up to and including the cell of its last sample.
pub fn grid(
    s: &RawSeries,
    start: Timestamp,
    interval: Duration,
    method: GridMethod,
    max_gap: Duration,
) -> Result<GriddedSeries> {
    if !interval.is_positive() {
        return Err(Error::validation("grid interval must be positive"));
    }
    let len = match s.last_time() {
        Some(last) if last >= start => (last - start).steps_of(interval) as usize + 1,
        _ => 1,
    };
    grid_n(s, start, interval, len, method, max_gap)
}

/// Grids `s` onto exactly `len` points.
///
/// A point takes its value from the latest sample at or before it (ZOH), or
/// from the two bracketing samples (linear). Samples flagged `Bad` never act
/// as anchors and interrupt a hold.
pub fn grid_n(
    s: &RawSeries,
    start: Timestamp,
    interval: Duration,
    len: usize,
    method: GridMethod,
    max_gap: Duration,
) -> Result<GriddedSeries> {
    if !interval.is_positive() {
        return Err(Error::validation("grid interval must be positive"));
    }
    if max_gap < interval {
        return Err(Error::validation(format!(
            "max_gap {max_gap} shorter than grid interval {interval}"
        )));
    }
    let samples = s.samples();
    let mut values = Vec::with_capacity(len.max(1));
    let mut idx = 0usize;
    for k in 0..len.max(1) {
        let t = start + interval * k as i64;
        while idx < samples.len() && samples[idx].time <= t {
            idx += 1;
        }
        let prev = idx.checked_sub(1).map(|i| &samples[i]);
        let next = samples.get(idx);
        let v = match method {
            GridMethod::ZeroOrderHold => hold(prev, t, max_gap),
            GridMethod::Linear => linear(prev, next, t, max_gap),
        };
        values.push(v);
    }
    GriddedSeries::new(s.tag().clone(), start, interval, values, method)
}

fn hold(prev: Option<&Sample>, t: Timestamp, max_gap: Duration) -> Option<f64> {
    let p = prev?;
    if p.is_anchor() && t - p.time <= max_gap {
        p.value
    } else {
        None
    }
}

fn linear(
    prev: Option<&Sample>,
    next: Option<&Sample>,
    t: Timestamp,
    max_gap: Duration,
) -> Option<f64> {
    let p = prev?;
    if p.time == t {
        return if p.is_anchor() { p.value } else { None };
    }
    let Some(n) = next else {
        return hold(prev, t, max_gap);
    };
    if !(p.is_anchor() && n.is_anchor()) || t - p.time > max_gap || n.time - t > max_gap {
        return None;
    }
    let (v0, v1) = (p.value?, n.value?);
    let frac = (t - p.time).as_micros() as f64 / (n.time - p.time).as_micros() as f64;
    let v = v0 + (v1 - v0) * frac;
    Some(v.clamp(v0.min(v1), v0.max(v1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: i64) -> Timestamp {
        Timestamp::from_secs(s)
    }

    fn secs(s: i64) -> Duration {
        Duration::from_secs(s)
    }

    #[test]
    fn resolution_examples() {
        let pts: Vec<_> = (0..10).map(|i| (ts(5 * i), 0.0)).collect();
        let s = RawSeries::from_points("A", &pts).unwrap();
        assert_eq!(detect_resolution(&s).unwrap().dominant, secs(5));

        let s = RawSeries::from_points(
            "A",
            &[(ts(0), 0.0), (ts(5), 0.0), (ts(10), 0.0), (ts(15), 0.0), (ts(75), 0.0)],
        )
        .unwrap();
        let r = detect_resolution(&s).unwrap();
        assert_eq!(r.dominant, secs(5));
        assert_eq!(r.histogram[&secs(5)], 3);
        assert_eq!(r.histogram[&secs(60)], 1);

        let one = RawSeries::from_points("A", &[(ts(0), 0.0)]).unwrap();
        assert!(matches!(detect_resolution(&one), Err(Error::NotEnoughData(_))));
    }

    #[test]
    fn linear_and_zoh_examples() {
        let s = RawSeries::from_points("A", &[(ts(0), 1.0), (ts(10), 2.0)]).unwrap();
        let lin = grid(&s, ts(0), secs(5), GridMethod::Linear, secs(10)).unwrap();
        assert_eq!(lin.values(), &[Some(1.0), Some(1.5), Some(2.0)]);
        let zoh = grid(&s, ts(0), secs(5), GridMethod::ZeroOrderHold, secs(10)).unwrap();
        assert_eq!(zoh.values(), &[Some(1.0), Some(1.0), Some(2.0)]);
    }

    #[test]
    fn long_gap_is_absent() {
        let s = RawSeries::from_points("A", &[(ts(0), 1.0), (ts(3600), 2.0)]).unwrap();
        for method in [GridMethod::ZeroOrderHold, GridMethod::Linear] {
            let g = grid(&s, ts(0), secs(60), method, Duration::from_mins(10)).unwrap();
            assert_eq!(g.len(), 61);
            assert!(g.values()[11..60].iter().all(Option::is_none), "{method:?}");
            assert_eq!(g.values()[60], Some(2.0));
        }
    }

    #[test]
    fn bad_samples_are_not_anchors() {
        let s = RawSeries::new(
            "A",
            vec![
                Sample::good(ts(0), 1.0),
                Sample::new(ts(10), 50.0, crate::model::QualityFlag::Bad),
                Sample::good(ts(20), 3.0),
            ],
        )
        .unwrap();
        let z = grid(&s, ts(0), secs(5), GridMethod::ZeroOrderHold, secs(60)).unwrap();
        assert_eq!(z.values(), &[Some(1.0), Some(1.0), None, None, Some(3.0)]);
        let l = grid(&s, ts(0), secs(5), GridMethod::Linear, secs(60)).unwrap();
        assert_eq!(l.values(), &[Some(1.0), None, None, None, Some(3.0)]);
    }

    #[test]
    fn tail_falls_back_to_hold() {
        let s = RawSeries::from_points("A", &[(ts(0), 1.0), (ts(10), 2.0)]).unwrap();
        let g = grid_n(&s, ts(0), secs(5), 4, GridMethod::Linear, secs(10)).unwrap();
        assert_eq!(g.values(), &[Some(1.0), Some(1.5), Some(2.0), Some(2.0)]);
    }

    #[test]
    fn max_gap_precondition() {
        let s = RawSeries::from_points("A", &[(ts(0), 1.0)]).unwrap();
        assert!(grid(&s, ts(0), secs(5), GridMethod::Linear, secs(4)).is_err());
    }

    fn arb_gridded() -> impl Strategy<Value = (GriddedSeries, GridMethod)> {
        (
            proptest::collection::vec(prop_oneof![1 => Just(None), 4 => (-100f64..100.0).prop_map(Some)], 1..60),
            1i64..30,
            prop_oneof![Just(GridMethod::ZeroOrderHold), Just(GridMethod::Linear)],
        )
            .prop_map(|(values, step, method)| {
                let g = GriddedSeries::new("G", ts(1000), secs(step), values, method).unwrap();
                (g, method)
            })
    }

    proptest! {
        #[test]
        fn regridding_is_idempotent((g, method) in arb_gridded(), gap_mult in 1i64..5) {
            let raw = g.to_raw();
            let again = grid(&raw, g.start(), g.interval(), method, g.interval() * gap_mult).unwrap();
            prop_assert_eq!(again, g);
        }

        #[test]
        fn outputs_stay_within_anchor_values(
            pts in proptest::collection::btree_map(0i64..500, -50f64..50.0, 2..30),
            step in 1i64..20,
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(t, v)| (ts(t), v)).collect();
            let s = RawSeries::from_points("A", &pts).unwrap();
            let inputs: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let z = grid(&s, ts(0), secs(step), GridMethod::ZeroOrderHold, secs(500)).unwrap();
            for v in z.values().iter().flatten() {
                prop_assert!(inputs.contains(v));
            }
            let l = grid(&s, ts(0), secs(step), GridMethod::Linear, secs(500)).unwrap();
            for (k, v) in l.values().iter().enumerate() {
                let Some(v) = v else { continue };
                let t = l.time_at(k);
                let before = pts.iter().rev().find(|p| p.0 <= t).unwrap().1;
                let after = pts.iter().find(|p| p.0 >= t).map_or(before, |p| p.1);
                prop_assert!(*v >= before.min(after) && *v <= before.max(after));
            }
        }
    }
}
