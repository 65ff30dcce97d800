// SPDX-License-Identifier: MIT OR Apache-2.0

//! Defect injection and the ground-truth manifest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{apply_clock_offset, Dataset};
use crate::model::{Duration, LabEvent, RawSeries, Sample, Segment, TagId, Timestamp};

/// Swinging-door re-archiving. A point is dropped only when the straight line
/// between the archived neighbours passes strictly within `deviation` of it,
/// so linear interpolation of the archive reconstructs every original value
/// to within `deviation`. Samples without a usable value are dropped.
pub fn swinging_door(s: &RawSeries, deviation: f64) -> Result<RawSeries> {
    if !(deviation >= 0.0) {
        return Err(Error::validation("compression deviation must be non-negative"));
    }
    let pts: Vec<&Sample> = s.samples().iter().filter(|x| x.is_anchor()).collect();
    if pts.len() <= 2 {
        return RawSeries::new(s.tag().clone(), pts.into_iter().copied().collect());
    }
    let val = |i: usize| pts[i].value.expect("anchor");
    let dt = |p: usize, i: usize| (pts[i].time - pts[p].time).as_micros() as f64;
    // open slope interval through the pivot satisfied by every skipped point
    let window = |p: usize, i: usize| {
        let d = dt(p, i);
        ((val(i) - deviation - val(p)) / d, (val(i) + deviation - val(p)) / d)
    };
    let mut kept = vec![0usize];
    let mut pivot = 0;
    let (mut lo, mut hi) = window(0, 1);
    for j in 2..pts.len() {
        let slope = (val(j) - val(pivot)) / dt(pivot, j);
        if slope > lo && slope < hi {
            let (a, b) = window(pivot, j);
            lo = lo.max(a);
            hi = hi.min(b);
        } else {
            pivot = j - 1;
            kept.push(pivot);
            (lo, hi) = window(pivot, j);
        }
    }
    kept.push(pts.len() - 1);
    RawSeries::new(s.tag().clone(), kept.into_iter().map(|i| *pts[i]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DefectKind {
    SwingingDoorCompression { deviation: f64 },
    StuckSensor { start: Timestamp, duration: Duration },
    Spike { times: Vec<Timestamp>, magnitudes: Vec<f64> },
    /// Shifts every tag of the target's source.
    ClockSkew { offset: Duration },
    Miscalibration { scale: f64 },
}

impl DefectKind {
    pub fn name(&self) -> &'static str {
        match self {
            DefectKind::SwingingDoorCompression { .. } => "swinging_door_compression",
            DefectKind::StuckSensor { .. } => "stuck_sensor",
            DefectKind::Spike { .. } => "spike",
            DefectKind::ClockSkew { .. } => "clock_skew",
            DefectKind::Miscalibration { .. } => "miscalibration",
        }
    }

    /// Value edits first, then re-archiving, then timestamps.
    fn phase(&self) -> u8 {
        match self {
            DefectKind::Miscalibration { .. } => 0,
            DefectKind::StuckSensor { .. } | DefectKind::Spike { .. } => 1,
            DefectKind::SwingingDoorCompression { .. } => 2,
            DefectKind::ClockSkew { .. } => 3,
        }
    }

    /// Time intervals the defect edits, for conflict checks.
    fn footprint(&self) -> Vec<(Timestamp, Timestamp)> {
        match self {
            DefectKind::StuckSensor { start, duration } => vec![(*start, *start + *duration)],
            DefectKind::Spike { times, .. } => times
                .iter()
                .map(|t| (*t, *t + Duration::from_micros(1)))
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSpec {
    pub target: TagId,
    #[serde(flatten)]
    pub kind: DefectKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectedDefect {
    pub target: TagId,
    pub kind: String,
    pub start: Option<Timestamp>,
    pub end: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<Timestamp>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayTruth {
    pub u: TagId,
    pub y: TagId,
    pub dead_time: Duration,
    pub steps: usize,
}

/// Everything a detector test may compare against.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthManifest {
    pub seed: u64,
    pub defects: Vec<InjectedDefect>,
    pub mode_boundaries: BTreeMap<TagId, Vec<Timestamp>>,
    pub lab_events: BTreeMap<TagId, Vec<LabEvent>>,
    pub dead_times: Vec<DelayTruth>,
    pub loop_modes: BTreeMap<TagId, Vec<Segment>>,
    /// Sign of the open-loop gain of each controlled pair, keyed `mv->cv`.
    pub gain_signs: BTreeMap<String, i8>,
}

fn check_conflicts(specs: &[DefectSpec]) -> Result<()> {
    for (i, a) in specs.iter().enumerate() {
        for b in &specs[i + 1..] {
            if a.target != b.target {
                continue;
            }
            let clash = a.kind.footprint().iter().any(|&(s0, e0)| {
                b.kind.footprint().iter().any(|&(s1, e1)| s0 < e1 && s1 < e0)
            });
            if clash {
                return Err(Error::Generation(format!(
                    "{} and {} overlap in time on {}",
                    a.kind.name(),
                    b.kind.name(),
                    a.target
                )));
            }
        }
    }
    Ok(())
}

fn edit_values(s: &RawSeries, mut f: impl FnMut(Timestamp, f64) -> f64) -> Result<RawSeries> {
    let samples = s
        .samples()
        .iter()
        .map(|x| Sample {
            value: x.value.map(|v| f(x.time, v)),
            ..*x
        })
        .collect();
    RawSeries::new(s.tag().clone(), samples)
}

fn apply_one(d: &mut Dataset, spec: &DefectSpec) -> Result<InjectedDefect> {
    let s = d.require(&spec.target)?.clone();
    let mut rec = InjectedDefect {
        target: spec.target.clone(),
        kind: spec.kind.name().to_string(),
        start: s.first_time(),
        end: s.last_time(),
        times: Vec::new(),
        params: BTreeMap::new(),
        source: None,
    };
    match &spec.kind {
        DefectKind::Miscalibration { scale } => {
            if !(*scale > 0.0) {
                return Err(Error::validation("miscalibration scale must be positive"));
            }
            d.replace_series(s.map_values(|v| v * scale))?;
            rec.params.insert("scale".into(), *scale);
        }
        DefectKind::StuckSensor { start, duration } => {
            if !duration.is_positive() {
                return Err(Error::validation("stuck duration must be positive"));
            }
            let end = *start + *duration;
            let frozen = s
                .samples()
                .iter()
                .filter(|x| x.time <= *start)
                .filter_map(|x| x.value)
                .next_back()
                .ok_or_else(|| Error::validation(format!("{} has no value before {start}", spec.target)))?;
            d.replace_series(edit_values(&s, |t, v| if t >= *start && t < end { frozen } else { v })?)?;
            rec.start = Some(*start);
            rec.end = Some(end);
            rec.params.insert("value".into(), frozen);
        }
        DefectKind::Spike { times, magnitudes } => {
            if times.len() != magnitudes.len() || times.is_empty() {
                return Err(Error::validation("spike times and magnitudes must pair up"));
            }
            let mut hits = vec![false; times.len()];
            let out = edit_values(&s, |t, v| match times.iter().position(|x| *x == t) {
                Some(i) => {
                    hits[i] = true;
                    v + magnitudes[i]
                }
                None => v,
            })?;
            if let Some(i) = hits.iter().position(|h| !h) {
                return Err(Error::validation(format!(
                    "{} has no sample at spike time {}",
                    spec.target, times[i]
                )));
            }
            d.replace_series(out)?;
            rec.start = times.iter().min().copied();
            rec.end = times.iter().max().copied();
            rec.times = times.clone();
            for (i, m) in magnitudes.iter().enumerate() {
                rec.params.insert(format!("magnitude_{i}"), *m);
            }
        }
        DefectKind::SwingingDoorCompression { deviation } => {
            let c = swinging_door(&s, *deviation)?;
            rec.params.insert("deviation".into(), *deviation);
            rec.params.insert("kept".into(), c.len() as f64);
            rec.params.insert("original".into(), s.len() as f64);
            d.replace_series(c)?;
        }
        DefectKind::ClockSkew { offset } => {
            let source = d.meta()[&spec.target].source.clone();
            *d = apply_clock_offset(d, &source, *offset)?;
            rec.params.insert("offset_s".into(), offset.as_secs_f64());
            rec.source = Some(source);
        }
    }
    Ok(rec)
}

/// Applies `specs` in phase order (value edits, re-archiving, clock skew),
/// keeping the given order within a phase.
pub fn inject_defects(d: &Dataset, specs: &[DefectSpec]) -> Result<(Dataset, TruthManifest)> {
    check_conflicts(specs)?;
    for s in specs {
        d.require(&s.target)?;
    }
    let mut order: Vec<&DefectSpec> = specs.iter().collect();
    order.sort_by_key(|s| s.kind.phase());
    let mut out = d.clone();
    let mut manifest = TruthManifest::default();
    for spec in order {
        manifest.defects.push(apply_one(&mut out, spec)?);
    }
    Ok((out, manifest))
}
