// SPDX-License-Identifier: MIT OR Apache-2.0

//! First-order-plus-dead-time plants and a PI loop around them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng_for;
use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries, RawSeries, Sample, Timestamp};

pub const MODE_MAN: f64 = 0.0;
pub const MODE_AUTO: f64 = 1.0;
const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoptdParams {
    pub gain: f64,
    pub time_constant: Duration,
    pub dead_time: Duration,
    /// Standard deviation of measurement noise added to the output.
    pub noise_sigma: f64,
}

impl FoptdParams {
    pub fn validate(&self) -> Result<()> {
        if !self.time_constant.is_positive() {
            return Err(Error::validation("time constant must be positive"));
        }
        if self.dead_time < Duration::ZERO {
            return Err(Error::validation("dead time must be non-negative"));
        }
        if !(self.noise_sigma >= 0.0) || !self.gain.is_finite() {
            return Err(Error::validation("gain must be finite and noise sigma non-negative"));
        }
        Ok(())
    }

    /// Pole `a = exp(-interval / tau)`.
    pub fn pole(&self, interval: Duration) -> f64 {
        (-interval.as_secs_f64() / self.time_constant.as_secs_f64()).exp()
    }

    /// Dead time rounded to whole grid steps.
    pub fn dead_steps(&self, interval: Duration) -> usize {
        (self.dead_time.as_secs_f64() / interval.as_secs_f64()).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantOutput {
    pub y: GriddedSeries,
    /// Dead time actually simulated, in grid steps.
    pub dead_steps: usize,
}

/// `x_k = a x_{k-1} + K (1 - a) u_{k-d}`, `y_k = x_k + noise`. The plant starts
/// at steady state for `u_0`; absent inputs hold the last present one.
pub fn gen_foptd(p: &FoptdParams, u: &GriddedSeries, seed: u64) -> Result<PlantOutput> {
    p.validate()?;
    let h = u.interval();
    let a = p.pole(h);
    let d = p.dead_steps(h);
    let mut held = Vec::with_capacity(u.len());
    let mut last = u
        .values()
        .iter()
        .flatten()
        .next()
        .copied()
        .ok_or_else(|| Error::AllAbsent(format!("input {} has no values", u.tag())))?;
    for v in u.values() {
        if let Some(v) = v {
            last = *v;
        }
        held.push(last);
    }
    let mut rng = rng_for(seed, 0);
    let mut x = p.gain * held[0];
    let values = (0..held.len())
        .map(|k| {
            let uk = held[k.saturating_sub(d)];
            x = a * x + p.gain * (1.0 - a) * uk;
            let e: f64 = StandardNormal.sample(&mut rng);
            x + p.noise_sigma * e
        })
        .collect::<Vec<_>>();
    Ok(PlantOutput {
        y: GriddedSeries::from_values("Y", u.start(), h, &values)?,
        dead_steps: d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiParams {
    pub kp: f64,
    /// Integral gain per second.
    pub ki: f64,
}

/// AR(1) output disturbance `d_k = phi d_{k-1} + sigma e_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub sigma: f64,
    pub phi: f64,
}

impl Disturbance {
    pub fn none() -> Self {
        Disturbance { sigma: 0.0, phi: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopData {
    pub mv: GriddedSeries,
    pub cv: GriddedSeries,
    /// One sample per grid step, `MODE_AUTO` or `MODE_MAN`.
    pub mode: RawSeries,
    pub dead_steps: usize,
}

struct LoopSim {
    a: f64,
    gain: f64,
    d: usize,
    x: f64,
    dist: f64,
    mv_hist: Vec<f64>,
    dist_p: Disturbance,
}

impl LoopSim {
    fn new(p: &FoptdParams, h: Duration, x0: f64, mv0: f64, dist_p: Disturbance) -> Self {
        LoopSim {
            a: p.pole(h),
            gain: p.gain,
            d: p.dead_steps(h),
            x: x0,
            dist: 0.0,
            mv_hist: vec![mv0],
            dist_p,
        }
    }

    /// Advances one step; the plant sees the move made `d + 1` steps earlier.
    fn step(&mut self, rng: &mut impl Rng) -> f64 {
        let idx = self.mv_hist.len().saturating_sub(1 + self.d);
        let u = self.mv_hist[idx];
        self.x = self.a * self.x + self.gain * (1.0 - self.a) * u;
        let e: f64 = StandardNormal.sample(rng);
        self.dist = self.dist_p.phi * self.dist + self.dist_p.sigma * e;
        self.x + self.dist
    }
}

fn mode_series(start: Timestamp, h: Duration, n: usize, code: f64) -> Result<RawSeries> {
    let samples = (0..n)
        .map(|k| Sample::good(start + h * k as i64, code))
        .collect();
    RawSeries::new("MODE", samples)
}

/// Velocity-form PI regulating the plant output to `setpoint` against an
/// additive output disturbance.
pub fn gen_closed_loop(
    plant: &FoptdParams,
    pi: &PiParams,
    setpoint: &GriddedSeries,
    dist: &Disturbance,
    seed: u64,
) -> Result<LoopData> {
    plant.validate()?;
    if plant.gain <= 0.0 {
        return Err(Error::validation("closed-loop plant gain must be positive"));
    }
    let h = setpoint.interval();
    let sp: Vec<f64> = setpoint
        .values()
        .iter()
        .map(|v| v.ok_or_else(|| Error::validation("setpoint must be present at every grid point")))
        .collect::<Result<_>>()?;
    let mv0 = sp[0] / plant.gain;
    let mut sim = LoopSim::new(plant, h, sp[0], mv0, *dist);
    let mut rng = rng_for(seed, 1);
    let mut mv = mv0;
    let mut e_prev = 0.0;
    let (mut mvs, mut cvs) = (Vec::with_capacity(sp.len()), Vec::with_capacity(sp.len()));
    for (k, &r) in sp.iter().enumerate() {
        let noise: f64 = StandardNormal.sample(&mut rng);
        let cv = sim.step(&mut rng) + plant.noise_sigma * noise;
        if !cv.is_finite() || cv.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Generation(format!(
                "closed loop diverged at step {k} (|cv| > {DIVERGENCE_LIMIT}); reduce kp/ki"
            )));
        }
        let e = r - cv;
        mv += pi.kp * (e - e_prev) + pi.ki * h.as_secs_f64() * e;
        e_prev = e;
        sim.mv_hist.push(mv);
        mvs.push(mv);
        cvs.push(cv);
    }
    Ok(LoopData {
        mv: GriddedSeries::from_values("MV", setpoint.start(), h, &mvs)?,
        cv: GriddedSeries::from_values("CV", setpoint.start(), h, &cvs)?,
        mode: mode_series(setpoint.start(), h, sp.len(), MODE_AUTO)?,
        dead_steps: sim.d,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrbsParams {
    pub bias: f64,
    pub amplitude: f64,
    /// Minimum grid steps between level switches.
    pub hold_steps: usize,
}

/// Pseudo-random binary level sequence around `bias`.
pub fn gen_prbs(
    p: &PrbsParams,
    start: Timestamp,
    interval: Duration,
    n: usize,
    seed: u64,
) -> Result<GriddedSeries> {
    if p.hold_steps == 0 {
        return Err(Error::validation("PRBS hold must be at least one step"));
    }
    let mut rng = rng_for(seed, 2);
    let mut level = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let values: Vec<f64> = (0..n)
        .map(|k| {
            if k > 0 && k % p.hold_steps == 0 && rng.random::<bool>() {
                level = -level;
            }
            p.bias + p.amplitude * level
        })
        .collect();
    GriddedSeries::from_values("MV", start, interval, &values)
}

/// Manual-mode counterpart of [`gen_closed_loop`]: the operator drives the
/// MV with a PRBS and the loop mode reads `MODE_MAN`.
pub fn gen_open_loop(
    plant: &FoptdParams,
    prbs: &PrbsParams,
    start: Timestamp,
    interval: Duration,
    n: usize,
    dist: &Disturbance,
    seed: u64,
) -> Result<LoopData> {
    plant.validate()?;
    let mv = gen_prbs(prbs, start, interval, n, seed)?;
    let x0 = plant.gain * mv.values()[0].expect("prbs is dense");
    let mut sim = LoopSim::new(plant, interval, x0, mv.values()[0].expect("dense"), *dist);
    sim.mv_hist.clear();
    let mut rng = rng_for(seed, 1);
    let mut cvs = Vec::with_capacity(n);
    for v in mv.values() {
        sim.mv_hist.push(v.expect("dense"));
        let noise: f64 = StandardNormal.sample(&mut rng);
        cvs.push(sim.step(&mut rng) + plant.noise_sigma * noise);
    }
    Ok(LoopData {
        cv: GriddedSeries::from_values("CV", start, interval, &cvs)?,
        mv,
        mode: mode_series(start, interval, n, MODE_MAN)?,
        dead_steps: sim.d,
    })
}
