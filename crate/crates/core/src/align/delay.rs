// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries};
use crate::stats::lagged_pearson;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayOptions {
    /// Search `[-max_lag, max_lag]` instead of `[0, max_lag]`.
    pub allow_negative: bool,
    pub confidence_floor: f64,
}

impl Default for DelayOptions {
    fn default() -> Self {
        DelayOptions {
            allow_negative: false,
            confidence_floor: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// Grid steps by which `y` trails `u`.
    pub lag: i64,
    pub lag_duration: Duration,
    pub peak_corr: f64,
    pub confident: bool,
}

/// Lag maximising |corr(u(t), y(t + lag))| over co-present pairs.
/// Ties go to the smaller |lag|.
pub fn estimate_delay(
    u: &GriddedSeries,
    y: &GriddedSeries,
    max_lag: Duration,
    opts: &DelayOptions,
) -> Result<DelayEstimate> {
    if !u.same_grid(y) {
        return Err(Error::validation(format!(
            "{} and {} are not on the same grid",
            u.tag(),
            y.tag()
        )));
    }
    if max_lag < Duration::ZERO {
        return Err(Error::validation("max_lag must be non-negative"));
    }
    let span = u.end() - u.start();
    if span < max_lag * 10 {
        return Err(Error::not_enough(format!(
            "series span {span} is shorter than 10x max lag {max_lag}"
        )));
    }
    let steps = max_lag.steps_of(u.interval());
    let mut best: Option<(i64, f64)> = None;
    for step in 0..=steps {
        let candidates: &[i64] = match (step, opts.allow_negative) {
            (0, _) => &[0],
            (_, true) => &[-step, step],
            (_, false) => &[step],
        };
        for &lag in candidates {
            let Some(r) = lagged_pearson(u.values(), y.values(), lag) else {
                continue;
            };
            if best.is_none_or(|(_, b)| r.abs() > b.abs()) {
                best = Some((lag, r));
            }
        }
    }
    let (lag, peak_corr) = best.ok_or_else(|| {
        Error::AllAbsent(format!(
            "{} and {} have no co-present, non-constant overlap at any lag",
            u.tag(),
            y.tag()
        ))
    })?;
    Ok(DelayEstimate {
        lag,
        lag_duration: u.interval() * lag,
        peak_corr,
        confident: peak_corr.abs() >= opts.confidence_floor,
    })
}

/// Moves values `lag` steps later (negative: earlier); vacated cells become absent.
pub fn apply_shift(s: &GriddedSeries, lag: i64) -> Result<GriddedSeries> {
    let n = s.len() as i64;
    if lag.abs() >= n {
        return Err(Error::validation(format!(
            "shift {lag} is not smaller than series length {n}"
        )));
    }
    let values = (0..n)
        .map(|k| {
            let src = k - lag;
            if (0..n).contains(&src) {
                s.values()[src as usize]
            } else {
                None
            }
        })
        .collect();
    s.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;
    use crate::stats::pearson;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gs(tag: &str, values: &[f64]) -> GriddedSeries {
        GriddedSeries::from_values(tag, Timestamp::from_secs(0), Duration::from_secs(5), values)
            .unwrap()
    }

    fn random_walk(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x += e;
                x
            })
            .collect()
    }

    #[test]
    fn identity_is_lag_zero() {
        let v = random_walk(500, 1);
        let e = estimate_delay(&gs("U", &v), &gs("Y", &v), Duration::from_secs(100), &DelayOptions::default())
            .unwrap();
        assert_eq!(e.lag, 0);
        assert!((e.peak_corr - 1.0).abs() < 1e-12);
        assert!(e.confident);
    }

    #[test]
    fn constructed_shift_of_seven() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..600).map(|k| if k >= 7 { u[k - 7] } else { 0.0 }).collect();
        let e = estimate_delay(&gs("U", &u), &gs("Y", &y), Duration::from_secs(200), &DelayOptions::default())
            .unwrap();
        assert_eq!(e.lag, 7);
        assert_eq!(e.lag_duration, Duration::from_secs(35));
    }

    #[test]
    fn reversed_pair_needs_negative_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..600).map(|_| StandardNormal.sample(&mut rng)).collect();
        let u: Vec<f64> = (0..600).map(|k| if k >= 4 { y[k - 4] } else { 0.0 }).collect();
        let opts = DelayOptions {
            allow_negative: true,
            ..DelayOptions::default()
        };
        let e = estimate_delay(&gs("U", &u), &gs("Y", &y), Duration::from_secs(100), &opts).unwrap();
        assert_eq!(e.lag, -4);
    }

    #[test]
    fn insufficient_overlap_and_all_absent() {
        let v = random_walk(50, 1);
        let r = estimate_delay(&gs("U", &v), &gs("Y", &v), Duration::from_secs(100), &DelayOptions::default());
        assert!(matches!(r, Err(Error::NotEnoughData(_))));

        let u = gs("U", &random_walk(200, 4));
        let y = u.with_values(vec![None; 200]).unwrap();
        let r = estimate_delay(&u, &y, Duration::from_secs(50), &DelayOptions::default());
        assert!(matches!(r, Err(Error::AllAbsent(_))));
    }

    #[test]
    fn shift_examples() {
        let g = gs("U", &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(apply_shift(&g, 0).unwrap(), g);
        let there = apply_shift(&g, 3).unwrap();
        assert_eq!(&there.values()[..4], &[None, None, None, Some(1.0)]);
        let back = apply_shift(&there, -3).unwrap();
        let expect: Vec<Option<f64>> = (0..8)
            .map(|k| if k < 5 { Some(k as f64 + 1.0) } else { None })
            .collect();
        assert_eq!(back.values(), &expect[..]);
        assert_eq!(back.start(), g.start());
        assert!(apply_shift(&g, 8).is_err());
    }

    #[test]
    fn shifting_by_estimate_maximises_zero_lag_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u: Vec<f64> = (0..800).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..800)
            .map(|k| {
                let e: f64 = StandardNormal.sample(&mut rng);
                let lead = if k >= 5 { 0.8 * u[k - 5] } else { 0.0 };
                lead + 0.3 * e
            })
            .collect();
        let (ug, yg) = (gs("U", &u), gs("Y", &y));
        let e = estimate_delay(&ug, &yg, Duration::from_secs(100), &DelayOptions::default()).unwrap();
        let zero_lag = |a: &GriddedSeries| {
            let pairs: Vec<_> = a.values().iter().zip(yg.values())
                .filter_map(|(x, y)| Some((x.as_ref().copied()?, y.as_ref().copied()?)))
                .collect();
            pearson(&pairs).unwrap()
        };
        let aligned = zero_lag(&apply_shift(&ug, e.lag).unwrap());
        for other in [0, 2, 4, 6, 9] {
            assert!(aligned >= zero_lag(&apply_shift(&ug, other).unwrap()));
        }
    }
}
