// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steady/transient segmentation with the R-statistic: the ratio of a filtered
//! variance about a filtered mean to a filtered variance of successive
//! differences. Near 1 at steady state, large during transients.
//!
//! Recursions, with `λ1, λ2, λ3 ∈ (0, 1]`:
//!
//! ```text
//! nu2    <- λ2 (x - xf_prev)^2 + (1 - λ2) nu2
//! delta2 <- λ3 (x - x_prev)^2  + (1 - λ3) delta2
//! xf     <- λ1 x + (1 - λ1) xf_prev
//! R       = (2 - λ1) nu2 / delta2
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, GriddedSeries, Segment, SegmentLabel};
use crate::stats::quantile_sorted;

/// Below this `delta2` the signal is treated as constant and `R = 1`.
pub const DELTA2_EPSILON: f64 = 1e-30;

/// Samples discarded before collecting the null distribution of `R`.
pub const CALIBRATION_BURN_IN: usize = 200;

/// Critical value for the default filter constants at alpha = 0.05, from
/// `calibrate_rcrit(.., 0.05, 200_000, 0)`.
pub const DEFAULT_R_CRIT: f64 = 1.43258;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RStatParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub r_crit: f64,
    /// Consecutive updates needed on one side of `r_crit` to change label.
    pub hold_count: usize,
}

impl Default for RStatParams {
    fn default() -> Self {
        RStatParams {
            lambda1: 0.2,
            lambda2: 0.1,
            lambda3: 0.1,
            r_crit: DEFAULT_R_CRIT,
            hold_count: 3,
        }
    }
}

impl RStatParams {
    pub fn with_r_crit(mut self, r_crit: f64) -> Self {
        self.r_crit = r_crit;
        self
    }

    fn validate_filters(&self) -> Result<()> {
        for (name, l) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if !(l > 0.0 && l <= 1.0) {
                return Err(Error::validation(format!("{name}={l} must lie in (0, 1]")));
            }
        }
        if self.hold_count == 0 {
            return Err(Error::validation("hold_count must be at least 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_filters()?;
        if !(self.r_crit > 1.0 && self.r_crit.is_finite()) {
            return Err(Error::validation(format!(
                "r_crit={} must be a finite value above 1",
                self.r_crit
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RStatState {
    pub x_prev: f64,
    pub xf: f64,
    pub nu2: f64,
    pub delta2: f64,
    pub r: f64,
    pub initialized: bool,
}

impl RStatState {
    /// First sample: `xf = x`, both variances zero, `R = 1`.
    pub fn seed(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::validation("R-statistic input must be finite"));
        }
        Ok(RStatState {
            x_prev: x,
            xf: x,
            nu2: 0.0,
            delta2: 0.0,
            r: 1.0,
            initialized: true,
        })
    }
}

/// One filter step. An uninitialised state is seeded with `x`.
pub fn rstat_update(state: &RStatState, x: f64, p: &RStatParams) -> Result<RStatState> {
    if !x.is_finite() {
        return Err(Error::validation("R-statistic input must be finite"));
    }
    if !state.initialized {
        return RStatState::seed(x);
    }
    let dev = x - state.xf;
    let diff = x - state.x_prev;
    let nu2 = p.lambda2 * dev * dev + (1.0 - p.lambda2) * state.nu2;
    let delta2 = p.lambda3 * diff * diff + (1.0 - p.lambda3) * state.delta2;
    let xf = p.lambda1 * x + (1.0 - p.lambda1) * state.xf;
    let r = if delta2 < DELTA2_EPSILON {
        1.0
    } else {
        (2.0 - p.lambda1) * nu2 / delta2
    };
    Ok(RStatState {
        x_prev: x,
        xf,
        nu2,
        delta2,
        r,
        initialized: true,
    })
}

/// R at every grid point; absent points carry no value and leave the state frozen.
pub fn rstat_trajectory(s: &GriddedSeries, p: &RStatParams) -> Result<Vec<Option<f64>>> {
    p.validate_filters()?;
    let mut state = RStatState::default();
    s.values()
        .iter()
        .map(|v| match v {
            Some(x) => {
                state = rstat_update(&state, *x, p)?;
                Ok(Some(state.r))
            }
            None => Ok(None),
        })
        .collect()
}

/// Labels each grid point steady or transient and returns segments tiling the
/// series. A run of `R > r_crit` (or `R <= r_crit`) changes the label only once
/// it reaches `hold_count` updates, and then from the first update of the run.
pub fn segment_steady(s: &GriddedSeries, p: &RStatParams) -> Result<Vec<Segment>> {
    p.validate()?;
    if s.present_count() < p.hold_count {
        return Err(Error::not_enough(format!(
            "tag {}: steady-state detection needs {} present values",
            s.tag(),
            p.hold_count
        )));
    }
    let r = rstat_trajectory(s, p)?;
    let transient = label_with_hysteresis(&r, p.r_crit, p.hold_count);

    let mut segs: Vec<Segment> = Vec::new();
    let mut run_start = 0usize;
    for k in 1..=transient.len() {
        if k < transient.len() && transient[k] == transient[run_start] {
            continue;
        }
        let rs: Vec<f64> = r[run_start..k].iter().flatten().copied().collect();
        let label = if transient[run_start] {
            SegmentLabel::Transient
        } else {
            SegmentLabel::SteadyState
        };
        let mut seg = Segment {
            start: s.time_at(run_start),
            end: s.time_at(k),
            label,
            evidence: None,
        };
        if !rs.is_empty() {
            seg.evidence = Some(rs.iter().sum::<f64>() / rs.len() as f64);
        }
        segs.push(seg);
        run_start = k;
    }
    Ok(segs)
}

fn label_with_hysteresis(r: &[Option<f64>], r_crit: f64, hold: usize) -> Vec<bool> {
    // present indices and whether they exceed the critical value
    let present: Vec<(usize, bool)> = r
        .iter()
        .enumerate()
        .filter_map(|(k, v)| v.map(|x| (k, x > r_crit)))
        .collect();
    let mut point_label = vec![false; present.len()];
    let mut current = false;
    let mut i = 0;
    while i < present.len() {
        let mut j = i;
        while j < present.len() && present[j].1 == present[i].1 {
            j += 1;
        }
        if j - i >= hold {
            current = present[i].1;
        }
        point_label[i..j].fill(current);
        i = j;
    }
    // absent grid points inherit the label of the preceding present point
    let mut out = vec![false; r.len()];
    let mut p = 0;
    let mut last = false;
    for (k, slot) in out.iter_mut().enumerate() {
        if p < present.len() && present[p].0 == k {
            last = point_label[p];
            p += 1;
        }
        *slot = last;
    }
    out
}

/// Monte Carlo critical value: the `1 - alpha` quantile of `R` on i.i.d.
/// standard normal input, after a burn-in. Bit-reproducible for a given seed.
pub fn calibrate_rcrit(p: &RStatParams, alpha: f64, n_mc: usize, seed: u64) -> Result<f64> {
    p.validate_filters()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha={alpha} must lie in (0, 1)")));
    }
    if n_mc < 1000 {
        return Err(Error::validation("calibration needs at least 1000 draws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = RStatState::default();
    let mut draws = Vec::with_capacity(n_mc);
    for i in 0..CALIBRATION_BURN_IN + n_mc {
        let x: f64 = StandardNormal.sample(&mut rng);
        state = rstat_update(&state, x, p)?;
        if i >= CALIBRATION_BURN_IN {
            draws.push(state.r);
        }
    }
    draws.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&draws, 1.0 - alpha).expect("n_mc >= 1000"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimParams {
    pub rstat: RStatParams,
    /// Kept at both ends of each dropped stretch so transitions survive.
    pub margin: Duration,
    /// Only jointly steady stretches at least this long are dropped.
    pub min_length: Duration,
}

/// Stretches where every key tag is steady, long enough to be worth removing,
/// shrunk by `margin` at each end.
pub fn trim_unexcited(key_tags: &[GriddedSeries], p: &TrimParams) -> Result<Vec<Segment>> {
    let Some(first) = key_tags.first() else {
        return Err(Error::validation("trim_unexcited needs at least one key tag"));
    };
    if let Some(bad) = key_tags.iter().find(|g| !g.same_grid(first)) {
        return Err(Error::validation(format!(
            "tag {} is not on the grid of {}",
            bad.tag(),
            first.tag()
        )));
    }
    if p.margin < Duration::ZERO {
        return Err(Error::validation("margin must be non-negative"));
    }
    let mut all_steady = vec![true; first.len()];
    for g in key_tags {
        let segs = segment_steady(g, &p.rstat)?;
        for (k, flag) in all_steady.iter_mut().enumerate() {
            let t = g.time_at(k);
            let steady = segs
                .iter()
                .any(|s| s.label == SegmentLabel::SteadyState && s.contains(t));
            *flag &= steady;
        }
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k < all_steady.len() {
        if !all_steady[k] {
            k += 1;
            continue;
        }
        let begin = k;
        while k < all_steady.len() && all_steady[k] {
            k += 1;
        }
        let (start, end) = (first.time_at(begin), first.time_at(k));
        if end - start < p.min_length {
            continue;
        }
        let (start, end) = (start + p.margin, end - p.margin);
        if start < end {
            out.push(Segment::new(start, end, SegmentLabel::SteadyState)?);
        }
    }
    Ok(out)
}
