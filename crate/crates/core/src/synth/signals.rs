// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test input signals: multi-level operating modes, spikes, steps, and
//! smooth random excitation.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries, Timestamp};

/// Piecewise-constant levels joined by raised-cosine ramps, plus white noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSignalParams {
    pub start: Timestamp,
    pub interval: Duration,
    /// `(level, dwell steps)` in order of visit.
    pub plan: Vec<(f64, usize)>,
    pub ramp_steps: usize,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSignal {
    pub series: GriddedSeries,
    /// Midpoints of each ramp.
    pub boundaries: Vec<Timestamp>,
    /// Index ranges `[lo, hi)` occupied by ramps.
    pub ramps: Vec<(usize, usize)>,
}

pub fn gen_mode_signal(p: &ModeSignalParams, seed: u64) -> Result<ModeSignal> {
    if p.plan.is_empty() || p.plan.iter().any(|&(_, d)| d == 0) {
        return Err(Error::validation("mode plan needs at least one non-empty dwell"));
    }
    let mut clean = Vec::new();
    let mut ramps = Vec::new();
    for (i, &(level, dwell)) in p.plan.iter().enumerate() {
        if i > 0 {
            let from = p.plan[i - 1].0;
            let lo = clean.len();
            for s in 0..p.ramp_steps {
                let f = (1.0 - (PI * (s as f64 + 0.5) / p.ramp_steps as f64).cos()) / 2.0;
                clean.push(from + (level - from) * f);
            }
            ramps.push((lo, clean.len()));
        }
        clean.extend(std::iter::repeat_n(level, dwell));
    }
    let mut rng = rng_for(seed, 10);
    let values: Vec<f64> = clean
        .iter()
        .map(|v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + p.sigma * e
        })
        .collect();
    let series = GriddedSeries::from_values("FEED", p.start, p.interval, &values)?;
    let boundaries = ramps
        .iter()
        .map(|&(lo, hi)| p.start + p.interval * ((lo + hi) / 2) as i64)
        .collect();
    Ok(ModeSignal {
        series,
        boundaries,
        ramps,
    })
}

/// Adds `count` impulses of `±magnitude` at random indices at least
/// `min_spacing` apart and outside `avoid`. Returns the sorted indices.
pub fn add_spikes(
    s: &GriddedSeries,
    count: usize,
    magnitude: f64,
    min_spacing: usize,
    avoid: &[(usize, usize)],
    seed: u64,
) -> Result<(GriddedSeries, Vec<usize>)> {
    let n = s.len();
    let mut rng = rng_for(seed, 11);
    let blocked = |k: usize| avoid.iter().any(|&(lo, hi)| k + min_spacing > lo && k < hi + min_spacing);
    for _ in 0..1000 {
        let mut idx = sample(&mut rng, n, count).into_vec();
        idx.sort_unstable();
        let spaced = idx.windows(2).all(|w| w[1] - w[0] >= min_spacing);
        let edges = idx.iter().all(|&k| k >= min_spacing && k + 1 < n);
        if !spaced || !edges || idx.iter().any(|&k| blocked(k)) {
            continue;
        }
        let mut values = s.values().to_vec();
        for (j, &k) in idx.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            values[k] = values[k].map(|v| v + sign * magnitude);
        }
        return Ok((s.with_values(values)?, idx));
    }
    Err(Error::Generation(format!(
        "could not place {count} spikes {min_spacing} steps apart in {n} points"
    )))
}

/// Canonical mostly-low series with one brief high excursion and spikes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoModeParams {
    pub low: f64,
    pub high: f64,
    pub sigma: f64,
    pub low_steps: usize,
    pub high_steps: usize,
    pub ramp_steps: usize,
    pub spikes: usize,
    /// In multiples of `sigma`.
    pub spike_magnitude: f64,
    pub spike_spacing: usize,
}

impl Default for TwoModeParams {
    fn default() -> Self {
        TwoModeParams {
            low: 0.0,
            high: 10.0,
            sigma: 1.0,
            low_steps: 1800,
            high_steps: 60,
            ramp_steps: 150,
            spikes: 6,
            spike_magnitude: 10.0,
            spike_spacing: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoMode {
    pub series: GriddedSeries,
    pub spikes: Vec<usize>,
    /// Index range of the high excursion including both ramps.
    pub excursion: (usize, usize),
}

pub fn gen_two_mode(p: &TwoModeParams, seed: u64) -> Result<TwoMode> {
    let signal = gen_mode_signal(
        &ModeSignalParams {
            start: Timestamp::from_secs(0),
            interval: Duration::from_secs(10),
            plan: vec![(p.low, p.low_steps), (p.high, p.high_steps), (p.low, p.low_steps)],
            ramp_steps: p.ramp_steps,
            sigma: p.sigma,
        },
        seed,
    )?;
    let excursion = (signal.ramps[0].0, signal.ramps[1].1);
    let (series, spikes) = add_spikes(
        &signal.series,
        p.spikes,
        p.spike_magnitude * p.sigma,
        p.spike_spacing,
        &[excursion],
        seed,
    )?;
    Ok(TwoMode {
        series: series.with_tag("TWO_MODE"),
        spikes,
        excursion,
    })
}

/// `before` for the first `at` steps, `after` from then on.
pub fn step_input(
    start: Timestamp,
    interval: Duration,
    n: usize,
    at: usize,
    before: f64,
    after: f64,
) -> Result<GriddedSeries> {
    let v: Vec<f64> = (0..n).map(|k| if k < at { before } else { after }).collect();
    GriddedSeries::from_values("U", start, interval, &v)
}

/// Unit-variance white noise passed through a first-order filter with pole `phi`.
pub fn gen_smooth_noise(
    start: Timestamp,
    interval: Duration,
    n: usize,
    phi: f64,
    seed: u64,
) -> Result<GriddedSeries> {
    if !(0.0..1.0).contains(&phi) {
        return Err(Error::validation("filter pole must be in [0, 1)"));
    }
    let mut rng = rng_for(seed, 12);
    let gain = (1.0 - phi * phi).sqrt();
    let mut x: f64 = StandardNormal.sample(&mut rng);
    let v: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + gain * e;
            x
        })
        .collect();
    GriddedSeries::from_values("X", start, interval, &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_signal_layout() {
        let p = ModeSignalParams {
            start: Timestamp::from_secs(0),
            interval: Duration::from_secs(1),
            plan: vec![(0.0, 10), (4.0, 10), (2.0, 5)],
            ramp_steps: 4,
            sigma: 0.0,
        };
        let m = gen_mode_signal(&p, 0).unwrap();
        assert_eq!(m.series.len(), 10 + 4 + 10 + 4 + 5);
        assert_eq!(m.ramps, vec![(10, 14), (24, 28)]);
        assert_eq!(m.boundaries, vec![Timestamp::from_secs(12), Timestamp::from_secs(26)]);
        let v: Vec<f64> = m.series.values().iter().map(|x| x.unwrap()).collect();
        assert!(v[10..14].windows(2).all(|w| w[1] > w[0]));
        assert_eq!(v[14], 4.0);
        assert!(v[10] > 0.0 && v[13] < 4.0);
    }

    #[test]
    fn spikes_respect_spacing_and_avoid() {
        let tm = gen_two_mode(&TwoModeParams::default(), 5).unwrap();
        assert_eq!(tm.spikes.len(), 6);
        assert!(tm.spikes.windows(2).all(|w| w[1] - w[0] >= 60));
        let (lo, hi) = tm.excursion;
        assert!(tm.spikes.iter().all(|&k| k + 60 <= lo || k >= hi + 60));
        assert_eq!(gen_two_mode(&TwoModeParams::default(), 5).unwrap(), tm);
    }

    #[test]
    fn smooth_noise_unit_variance() {
        let s = gen_smooth_noise(Timestamp::from_secs(0), Duration::from_secs(1), 20000, 0.9, 1).unwrap();
        let v: Vec<f64> = s.values().iter().map(|x| x.unwrap()).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }
}
