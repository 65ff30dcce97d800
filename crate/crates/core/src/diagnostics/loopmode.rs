// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::finding::{Finding, FindingKind};
use crate::error::{Error, Result};
use crate::ingest::detect_resolution;
use crate::model::{merge_adjacent, GriddedSeries, RawSeries, Segment, SegmentLabel, Timestamp};
use crate::stats::pearson;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopMode {
    Open,
    Closed,
}

impl LoopMode {
    pub fn label(self) -> SegmentLabel {
        match self {
            LoopMode::Open => SegmentLabel::OpenLoop,
            LoopMode::Closed => SegmentLabel::ClosedLoop,
        }
    }
}

/// Integer mode code (e.g. 0 = MAN, 1 = AUTO) to loop state.
pub type ModeMap = BTreeMap<i64, LoopMode>;

fn code_of(v: f64) -> Option<i64> {
    let r = v.round();
    ((v - r).abs() <= 1e-9 && r.abs() < 9e15).then_some(r as i64)
}

/// Runs of constant loop state tiling `[first sample, until)`. Without `until`
/// the last run extends one dominant scan interval past the last sample.
/// Missing or bad samples hold the previous state.
pub fn segment_loop_mode(
    mode_tag: &RawSeries,
    map: &ModeMap,
    until: Option<Timestamp>,
) -> Result<Vec<Segment>> {
    let anchors: Vec<(Timestamp, f64)> = mode_tag
        .samples()
        .iter()
        .filter(|s| s.is_anchor())
        .map(|s| (s.time, s.value.expect("anchor")))
        .collect();
    let mut unmapped = BTreeSet::new();
    let mut states = Vec::with_capacity(anchors.len());
    for &(t, v) in &anchors {
        match code_of(v).and_then(|c| map.get(&c)) {
            Some(m) => states.push((t, *m)),
            None => {
                unmapped.insert(v.to_string());
            }
        }
    }
    if !unmapped.is_empty() {
        let list: Vec<String> = unmapped.into_iter().collect();
        return Err(Error::validation(format!(
            "tag {}: unmapped mode values {}",
            mode_tag.tag(),
            list.join(", ")
        )));
    }
    let Some(&(t0, _)) = states.first() else {
        return Err(Error::not_enough(format!("tag {} has no mode samples", mode_tag.tag())));
    };
    let last = states[states.len() - 1].0;
    let end = match until {
        Some(u) if u <= last => {
            return Err(Error::validation(format!(
                "segment end {u} is not after last mode sample {last}"
            )))
        }
        Some(u) => u,
        None => last + detect_resolution(mode_tag)?.dominant,
    };
    let mut segs = Vec::new();
    let mut run_start = t0;
    let mut run_mode = states[0].1;
    for &(t, m) in &states[1..] {
        if m != run_mode {
            segs.push(Segment::new(run_start, t, run_mode.label())?);
            run_start = t;
            run_mode = m;
        }
    }
    segs.push(Segment::new(run_start, end, run_mode.label())?);
    Ok(segs)
}

/// Effective loop state of one variable: closed only where both the global
/// controller flag and the per-variable service flag are closed. Covers the
/// overlap of both tilings.
pub fn combine_loop_modes(global: &[Segment], service: &[Segment]) -> Result<Vec<Segment>> {
    let closed = |s: &Segment| s.label == SegmentLabel::ClosedLoop;
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < global.len() && j < service.len() {
        let (g, s) = (&global[i], &service[j]);
        let lo = g.start.max(s.start);
        let hi = g.end.min(s.end);
        if lo < hi {
            let label = if closed(g) && closed(s) {
                SegmentLabel::ClosedLoop
            } else {
                SegmentLabel::OpenLoop
            };
            out.push(Segment::new(lo, hi, label)?);
        }
        if g.end <= s.end {
            i += 1;
        } else {
            j += 1;
        }
    }
    Ok(merge_adjacent(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    fn agrees(self, rho: f64) -> bool {
        match self {
            Sign::Positive => rho > 0.0,
            Sign::Negative => rho < 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignCheckParams {
    pub expected_open_loop_sign: Sign,
    pub min_pairs: usize,
    /// Correlate first differences instead of levels.
    pub differenced: bool,
}

impl SignCheckParams {
    pub fn new(expected_open_loop_sign: Sign) -> Self {
        SignCheckParams {
            expected_open_loop_sign,
            min_pairs: 30,
            differenced: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignCheck {
    pub open_rho: Option<f64>,
    pub closed_rho: Option<f64>,
    pub open_pairs: usize,
    pub closed_pairs: usize,
    pub notes: Vec<String>,
    pub findings: Vec<Finding>,
}

pub fn closed_loop_sign_check(
    mv: &GriddedSeries,
    cv: &GriddedSeries,
    segments: &[Segment],
    p: &SignCheckParams,
) -> Result<SignCheck> {
    if !mv.same_grid(cv) {
        return Err(Error::validation(format!(
            "{} and {} are not on the same grid",
            mv.tag(),
            cv.tag()
        )));
    }
    let class_at = |k: usize| {
        let t = mv.time_at(k);
        segments.iter().find(|s| s.contains(t)).map(|s| s.label)
    };
    let mut open = Vec::new();
    let mut closed = Vec::new();
    for k in 0..mv.len() {
        let Some(label) = class_at(k) else { continue };
        let pair = if p.differenced {
            if k == 0 || class_at(k - 1) != Some(label) {
                continue;
            }
            match (mv.values()[k], mv.values()[k - 1], cv.values()[k], cv.values()[k - 1]) {
                (Some(a), Some(a0), Some(b), Some(b0)) => Some((a - a0, b - b0)),
                _ => None,
            }
        } else {
            mv.values()[k].zip(cv.values()[k])
        };
        let Some(pair) = pair else { continue };
        match label {
            SegmentLabel::OpenLoop => open.push(pair),
            SegmentLabel::ClosedLoop => closed.push(pair),
            _ => {}
        }
    }
    let mut notes = Vec::new();
    let mut rho_of = |name: &str, pairs: &[(f64, f64)]| {
        if pairs.len() < p.min_pairs {
            notes.push(format!("{name}-loop portion has {} pairs, skipped", pairs.len()));
            return None;
        }
        let r = pearson(pairs);
        if r.is_none() {
            notes.push(format!("{name}-loop portion has zero variance, skipped"));
        }
        r
    };
    let open_rho = rho_of("open", &open);
    let closed_rho = rho_of("closed", &closed);

    let mut findings = Vec::new();
    let expected = p.expected_open_loop_sign;
    if let Some(rc) = closed_rho {
        let open_ok = open_rho.is_none_or(|ro| expected.agrees(ro));
        if !expected.agrees(rc) && open_ok {
            let closed_segs: Vec<Segment> = segments
                .iter()
                .filter(|s| s.label == SegmentLabel::ClosedLoop)
                .copied()
                .collect();
            let mut f = Finding::new(
                FindingKind::SignFlip,
                vec![mv.tag().clone(), cv.tag().clone()],
                format!(
                    "closed-loop correlation {rc:.3} between {} and {} contradicts the expected open-loop sign; \
                     regressing on closed-loop data would invert the relationship",
                    mv.tag(),
                    cv.tag()
                ),
            )
            .with_evidence("closed_rho", rc)
            .with_evidence("closed_pairs", closed.len() as f64)
            .with_segments(closed_segs);
            if let Some(ro) = open_rho {
                f = f
                    .with_evidence("open_rho", ro)
                    .with_evidence("open_pairs", open.len() as f64);
            }
            findings.push(f);
        }
    }
    Ok(SignCheck {
        open_rho,
        closed_rho,
        open_pairs: open.len(),
        closed_pairs: closed.len(),
        notes,
        findings,
    })
}
