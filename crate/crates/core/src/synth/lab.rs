// SPDX-License-Identifier: MIT OR Apache-2.0

//! Emulated lab sampling: sample switch, result tag and acceptance pulse.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries, LabEvent, RawSeries, Sample, Timestamp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabChannelParams {
    pub delay_lo: Duration,
    pub delay_hi: Duration,
    /// Exactly `round(reject_fraction * n)` results are rejected.
    pub reject_fraction: f64,
    pub meas_sigma: f64,
    /// Operator reaction between result entry and acceptance.
    pub ack_delay: Duration,
    pub pulse_width: Duration,
}

impl Default for LabChannelParams {
    fn default() -> Self {
        LabChannelParams {
            delay_lo: Duration::from_mins(30),
            delay_hi: Duration::from_mins(90),
            reject_fraction: 0.1,
            meas_sigma: 0.0,
            ack_delay: Duration::from_secs(30),
            pulse_width: Duration::from_secs(30),
        }
    }
}

impl LabChannelParams {
    /// Smallest acceptance window that sees every generated pulse.
    pub fn accept_window(&self) -> Duration {
        self.ack_delay + self.pulse_width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabChannel {
    pub indicator: RawSeries,
    pub results: RawSeries,
    pub acceptance: RawSeries,
    pub events: Vec<LabEvent>,
}

pub fn gen_lab_channel(
    truth: &GriddedSeries,
    schedule: &[Timestamp],
    p: &LabChannelParams,
    seed: u64,
) -> Result<LabChannel> {
    if p.delay_lo > p.delay_hi || !p.delay_lo.is_positive() {
        return Err(Error::validation("result delay range must be positive and ordered"));
    }
    if !(0.0..=1.0).contains(&p.reject_fraction) || !(p.meas_sigma >= 0.0) {
        return Err(Error::validation("reject fraction in [0, 1] and sigma >= 0 required"));
    }
    if !p.pulse_width.is_positive() || p.ack_delay < Duration::ZERO {
        return Err(Error::validation("acceptance pulse timing must be positive"));
    }
    let busy = p.delay_hi + p.accept_window();
    for w in schedule.windows(2) {
        if w[1] <= w[0] + busy {
            return Err(Error::Generation(format!(
                "lab cycles overlap: sample at {} before the previous cycle ending after {}",
                w[1],
                w[0] + busy
            )));
        }
    }
    let Some(&first) = schedule.first() else {
        return Err(Error::validation("empty lab schedule"));
    };
    let origin = truth.start();
    if first <= origin {
        return Err(Error::validation("first lab sample must follow the start of the truth series"));
    }

    let mut rng = rng_for(seed, 20);
    let n = schedule.len();
    let n_reject = (p.reject_fraction * n as f64).round() as usize;
    let mut rejected = vec![false; n];
    for k in sample(&mut rng, n, n_reject) {
        rejected[k] = true;
    }
    let span = (p.delay_hi - p.delay_lo).as_micros() / 1_000_000;

    let mut ind = vec![Sample::good(origin, 0.0)];
    let mut res = Vec::new();
    let mut acc = vec![Sample::good(origin, 0.0)];
    let mut events = Vec::with_capacity(n);
    for (k, &t_i) in schedule.iter().enumerate() {
        let delay = p.delay_lo + Duration::from_secs(rng.random_range(0..=span));
        let t_j = t_i + delay;
        let x = truth.value_at(t_i).ok_or_else(|| {
            Error::Generation(format!("truth {} has no value at lab sample {t_i}", truth.tag()))
        })?;
        let e: f64 = StandardNormal.sample(&mut rng);
        let value = x + p.meas_sigma * e;
        ind.push(Sample::good(t_i, 1.0));
        ind.push(Sample::good(t_j, 0.0));
        res.push(Sample::good(t_j, value));
        if !rejected[k] {
            let up = t_j + p.ack_delay;
            acc.push(Sample::good(up, 1.0));
            acc.push(Sample::good(up + p.pulse_width, 0.0));
        }
        events.push(LabEvent::new(t_i, Duration::ZERO, t_j, value, !rejected[k])?);
    }
    Ok(LabChannel {
        indicator: RawSeries::new("LAB.I", ind)?,
        results: RawSeries::new("LAB.Y", res)?,
        acceptance: RawSeries::new("LAB.A", acc)?,
        events,
    })
}

/// `n` sample times every `every`, the first at `first`.
pub fn regular_schedule(first: Timestamp, every: Duration, n: usize) -> Vec<Timestamp> {
    (0..n).map(|k| first + every * k as i64).collect()
}
