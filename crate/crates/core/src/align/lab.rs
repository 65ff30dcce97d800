// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lab sample lifecycle reconstruction from the sample indicator `I`, the
//! result tag and the optional operator acceptance pulse `A`.
//!
//! `I` rises when the sample is drawn (`t_i`) and falls when the result is
//! reported (`t_j`). A result counts as accepted when `A` pulses 0 -> 1 -> 0
//! inside `[t_j, t_j + accept_window]`. Without an acceptance tag every
//! complete cycle is accepted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, LabEvent, RawSeries, Timestamp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabParseOptions {
    pub accept_window: Duration,
    /// Configured correction from switch time to true sample collection time.
    pub delta_t: Duration,
    /// Allowed distance of indicator values from 0 or 1.
    pub level_tolerance: f64,
}

impl LabParseOptions {
    pub fn new(accept_window: Duration) -> Self {
        LabParseOptions {
            accept_window,
            delta_t: Duration::ZERO,
            level_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenReason {
    /// Sample taken but no result before the end of the stream.
    NoFallingEdge,
    /// Indicator cycle completed but no result value near `t_j`.
    NoResult,
}

/// A cycle that cannot produce a residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenCycle {
    pub sample_time: Timestamp,
    pub result_time: Option<Timestamp>,
    pub reason: OpenReason,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabParse {
    pub events: Vec<LabEvent>,
    pub open: Vec<OpenCycle>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Edge {
    Rise(Timestamp),
    Fall(Timestamp),
}

fn edges(s: &RawSeries, tol: f64) -> Result<Vec<Edge>> {
    let mut out = Vec::new();
    let mut level: Option<bool> = None;
    for sample in s.samples().iter().filter(|x| x.is_anchor()) {
        let v = sample.value.expect("anchors carry values");
        let high = if v.abs() <= tol {
            false
        } else if (v - 1.0).abs() <= tol {
            true
        } else {
            return Err(Error::validation(format!(
                "tag {}: value {v} at {} is not 0 or 1",
                s.tag(),
                sample.time
            )));
        };
        match (level, high) {
            (Some(false), true) => out.push(Edge::Rise(sample.time)),
            (Some(true), false) => out.push(Edge::Fall(sample.time)),
            (None, false) => {}
            (None, true) => out.push(Edge::Rise(sample.time)),
            _ => {}
        }
        level = Some(high);
    }
    Ok(out)
}

fn pulse_within(a_edges: &[Edge], from: Timestamp, to: Timestamp) -> bool {
    let mut rose = false;
    for e in a_edges {
        match *e {
            Edge::Rise(t) if t >= from && t <= to => rose = true,
            Edge::Fall(t) if rose && t <= to => return true,
            Edge::Rise(t) if t > to => return false,
            _ => {}
        }
    }
    false
}

pub fn parse_lab_events(
    indicator: &RawSeries,
    results: &RawSeries,
    acceptance: Option<&RawSeries>,
    opts: &LabParseOptions,
) -> Result<LabParse> {
    if opts.accept_window < Duration::ZERO {
        return Err(Error::validation("accept_window must be non-negative"));
    }
    let tol = opts.level_tolerance;
    let mut i_edges = edges(indicator, tol)?;
    // a stream that opens high has an unknown sample time
    if let (Some(first), Some(Edge::Rise(t))) = (indicator.first_time(), i_edges.first().copied()) {
        if t == first {
            i_edges.remove(0);
        }
    }
    let a_edges = match acceptance {
        Some(a) => Some(edges(a, tol)?),
        None => None,
    };

    let mut out = LabParse::default();
    let mut pending: Option<Timestamp> = None;
    for edge in i_edges {
        match edge {
            Edge::Rise(t) => pending = Some(t),
            Edge::Fall(t_j) => {
                let Some(t_i) = pending.take() else {
                    let msg = format!(
                        "tag {}: falling edge at {t_j} without a preceding rising edge, skipped",
                        indicator.tag()
                    );
                    log::warn!("{msg}");
                    out.warnings.push(msg);
                    continue;
                };
                let lo = t_j - opts.accept_window;
                let hi = t_j + opts.accept_window;
                let value = results
                    .samples()
                    .iter()
                    .rev()
                    .filter(|s| s.is_anchor() && s.time >= lo && s.time <= hi)
                    .find_map(|s| s.value);
                let Some(value) = value else {
                    out.warnings.push(format!(
                        "no {} value within {} of result time {t_j}",
                        results.tag(),
                        opts.accept_window
                    ));
                    out.open.push(OpenCycle {
                        sample_time: t_i,
                        result_time: Some(t_j),
                        reason: OpenReason::NoResult,
                    });
                    continue;
                };
                let accepted = a_edges
                    .as_deref()
                    .is_none_or(|a| pulse_within(a, t_j, hi));
                out.events
                    .push(LabEvent::new(t_i, opts.delta_t, t_j, value, accepted)?);
            }
        }
    }
    if let Some(t_i) = pending {
        out.open.push(OpenCycle {
            sample_time: t_i,
            result_time: None,
            reason: OpenReason::NoFallingEdge,
        });
    }
    Ok(out)
}
