// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::finding::{Finding, FindingKind};
use crate::error::{Error, Result};
use crate::model::{merge_adjacent, Duration, GriddedSeries, Segment, SegmentLabel, TagId, TagMeta, Timestamp};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceParams {
    pub window: Duration,
    pub tolerance_frac: f64,
    /// Windows whose total inflow is below this are indeterminate.
    pub epsilon: f64,
}

impl BalanceParams {
    pub fn new(window: Duration, tolerance_frac: f64) -> Self {
        BalanceParams {
            window,
            tolerance_frac,
            epsilon: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowStatus {
    Closed,
    Gap,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceWindow {
    pub start: Timestamp,
    pub end: Timestamp,
    pub sum_in: f64,
    pub sum_out: f64,
    /// `(sum_in - sum_out) / max(sum_in, epsilon)`; absent when indeterminate.
    pub imbalance: Option<f64>,
    pub status: WindowStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceResult {
    pub windows: Vec<BalanceWindow>,
    pub findings: Vec<Finding>,
}

fn check_units(flows: &[&GriddedSeries], meta: &BTreeMap<TagId, TagMeta>) -> Result<()> {
    let mut seen: Option<(&TagId, &str)> = None;
    for s in flows {
        let Some(m) = meta.get(s.tag()) else { continue };
        if m.unit.is_empty() {
            continue;
        }
        match seen {
            None => seen = Some((s.tag(), &m.unit)),
            Some((t, u)) if u != m.unit => {
                return Err(Error::validation(format!(
                    "flow units differ: {t} in {u}, {} in {}",
                    s.tag(),
                    m.unit
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Windowed mass/energy closure. Only rows where every flow is present count.
pub fn balance_closure(
    in_flows: &[GriddedSeries],
    out_flows: &[GriddedSeries],
    meta: &BTreeMap<TagId, TagMeta>,
    p: &BalanceParams,
) -> Result<BalanceResult> {
    let all: Vec<&GriddedSeries> = in_flows.iter().chain(out_flows).collect();
    let Some(first) = all.first() else {
        return Err(Error::validation("balance needs at least one flow"));
    };
    if in_flows.is_empty() || out_flows.is_empty() {
        return Err(Error::validation("balance needs inflows and outflows"));
    }
    if let Some(s) = all.iter().find(|s| !s.same_grid(first)) {
        return Err(Error::validation(format!(
            "{} is not on the grid of {}",
            s.tag(),
            first.tag()
        )));
    }
    if p.window < first.interval() {
        return Err(Error::validation("balance window shorter than grid interval"));
    }
    if !(p.tolerance_frac >= 0.0) || !(p.epsilon > 0.0) {
        return Err(Error::validation("tolerance must be >= 0 and epsilon > 0"));
    }
    check_units(&all, meta)?;

    let step = p.window.steps_of(first.interval()) as usize;
    let n = first.len();
    let mut windows = Vec::new();
    for lo in (0..n).step_by(step) {
        let hi = (lo + step).min(n);
        let (mut sum_in, mut sum_out, mut rows) = (0.0, 0.0, 0usize);
        for k in lo..hi {
            let ins: Option<f64> = in_flows.iter().map(|s| s.values()[k]).sum();
            let outs: Option<f64> = out_flows.iter().map(|s| s.values()[k]).sum();
            if let (Some(a), Some(b)) = (ins, outs) {
                sum_in += a;
                sum_out += b;
                rows += 1;
            }
        }
        let (imbalance, status) = if rows == 0 || sum_in < p.epsilon {
            (None, WindowStatus::Indeterminate)
        } else {
            let imb = (sum_in - sum_out) / sum_in.max(p.epsilon);
            let st = if imb.abs() > p.tolerance_frac {
                WindowStatus::Gap
            } else {
                WindowStatus::Closed
            };
            (Some(imb), st)
        };
        windows.push(BalanceWindow {
            start: first.time_at(lo),
            end: first.time_at(hi),
            sum_in,
            sum_out,
            imbalance,
            status,
        });
    }

    let gaps: Vec<&BalanceWindow> = windows.iter().filter(|w| w.status == WindowStatus::Gap).collect();
    let mut findings = Vec::new();
    if !gaps.is_empty() {
        let imbs: Vec<f64> = gaps.iter().filter_map(|w| w.imbalance).collect();
        let worst = imbs.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        let mean = imbs.iter().sum::<f64>() / imbs.len() as f64;
        let segs = merge_adjacent(
            gaps.iter()
                .map(|w| Segment::new(w.start, w.end, SegmentLabel::Anomaly))
                .collect::<Result<Vec<_>>>()?,
        );
        let tags = all.iter().map(|s| s.tag().clone()).collect();
        findings.push(
            Finding::new(
                FindingKind::BalanceGap,
                tags,
                format!(
                    "{} of {} windows exceed closure tolerance {}; worst imbalance {worst:.4}",
                    gaps.len(),
                    windows.len(),
                    p.tolerance_frac
                ),
            )
            .with_evidence("worst_imbalance", worst)
            .with_evidence("mean_gap_imbalance", mean)
            .with_evidence("gap_windows", gaps.len() as f64)
            .with_evidence("windows", windows.len() as f64)
            .with_segments(segs),
        );
    }
    Ok(BalanceResult { windows, findings })
}
