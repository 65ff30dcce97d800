// SPDX-License-Identifier: MIT OR Apache-2.0

//! Shared data model: timestamps, raw and gridded series, tag metadata,
//! segments and lab events.
//!
//! Every type here is immutable after construction and validated at the
//! boundary, so downstream operations can rely on ordering and finiteness.
//! Times are integer microseconds since the Unix epoch, UTC.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Microseconds since 1970-01-01T00:00:00Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_micros(micros: i64) -> Self {
        Timestamp(micros)
    }

    pub const fn from_secs(secs: i64) -> Self {
        Timestamp(secs * 1_000_000)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// Parses RFC 3339 / ISO-8601 text with an explicit UTC offset.
    pub fn parse_iso(text: &str) -> Result<Self> {
        let dt = DateTime::parse_from_rfc3339(text.trim())
            .map_err(|e| Error::validation(format!("bad timestamp {text:?}: {e}")))?;
        Ok(Timestamp(dt.timestamp_micros()))
    }

    /// `YYYY-MM-DDTHH:MM:SS.ffffffZ`
    pub fn to_iso(self) -> String {
        match DateTime::<Utc>::from_timestamp_micros(self.0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Micros, true),
            None => format!("@{}us", self.0),
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Timestamp::parse_iso(&text).map_err(serde::de::Error::custom)
    }
}

/// Signed span of time in microseconds.
///
/// Text form is a number with a unit suffix (`us`, `ms`, `s`, `min`, `h`),
/// e.g. `"90s"` or `"-2.5min"`. A bare number means seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Duration(i64);

impl Duration {
    pub const ZERO: Duration = Duration(0);

    pub const fn from_micros(micros: i64) -> Self {
        Duration(micros)
    }

    pub const fn from_millis(millis: i64) -> Self {
        Duration(millis * 1_000)
    }

    pub const fn from_secs(secs: i64) -> Self {
        Duration(secs * 1_000_000)
    }

    pub const fn from_mins(mins: i64) -> Self {
        Duration(mins * 60_000_000)
    }

    pub const fn from_hours(hours: i64) -> Self {
        Duration(hours * 3_600_000_000)
    }

    /// Rounds to the nearest microsecond.
    pub fn from_secs_f64(secs: f64) -> Self {
        Duration((secs * 1e6).round() as i64)
    }

    pub const fn as_micros(self) -> i64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub const fn abs(self) -> Self {
        Duration(self.0.abs())
    }

    pub const fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Whole number of `step`s contained in `self` (floor division).
    pub fn steps_of(self, step: Duration) -> i64 {
        self.0.div_euclid(step.0)
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", self.as_secs_f64())
    }
}

impl FromStr for Duration {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let split = t
            .find(|c: char| c.is_ascii_alphabetic())
            .unwrap_or(t.len());
        let (num, unit) = t.split_at(split);
        let scale = match unit {
            "us" => 1e-6,
            "ms" => 1e-3,
            "" | "s" => 1.0,
            "min" | "m" => 60.0,
            "h" => 3600.0,
            _ => return Err(Error::validation(format!("unknown duration unit in {text:?}"))),
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("invalid duration {text:?}")))?;
        if !v.is_finite() {
            return Err(Error::validation(format!("invalid duration {text:?}")));
        }
        Ok(Duration::from_secs_f64(v * scale))
    }
}

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Duration;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a duration such as \"30s\" or a number of seconds")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<Duration, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> std::result::Result<Duration, E> {
                Ok(Duration::from_secs(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> std::result::Result<Duration, E> {
                i64::try_from(v).map(Duration::from_secs).map_err(E::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> std::result::Result<Duration, E> {
                Ok(Duration::from_secs_f64(v))
            }
        }
        d.deserialize_any(V)
    }
}

impl Add<Duration> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 + rhs.0)
    }
}

impl Sub<Duration> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Duration) -> Timestamp {
        Timestamp(self.0 - rhs.0)
    }
}

impl Sub for Timestamp {
    type Output = Duration;
    fn sub(self, rhs: Timestamp) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Add for Duration {
    type Output = Duration;
    fn add(self, rhs: Duration) -> Duration {
        Duration(self.0 + rhs.0)
    }
}

impl Sub for Duration {
    type Output = Duration;
    fn sub(self, rhs: Duration) -> Duration {
        Duration(self.0 - rhs.0)
    }
}

impl Neg for Duration {
    type Output = Duration;
    fn neg(self) -> Duration {
        Duration(-self.0)
    }
}

impl Mul<i64> for Duration {
    type Output = Duration;
    fn mul(self, rhs: i64) -> Duration {
        Duration(self.0 * rhs)
    }
}

/// Historian tag name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TagId(String);

impl TagId {
    pub fn new(name: impl Into<String>) -> Self {
        TagId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TagId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TagId {
    fn from(s: &str) -> Self {
        TagId(s.to_owned())
    }
}

impl From<String> for TagId {
    fn from(s: String) -> Self {
        TagId(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    Good,
    Bad,
    Questionable,
    Substituted,
}

impl QualityFlag {
    /// Maps a source quality code; anything unrecognised is `Questionable`.
    pub fn from_code(code: &str) -> Self {
        match code.trim().to_ascii_lowercase().as_str() {
            "good" | "" => QualityFlag::Good,
            "bad" => QualityFlag::Bad,
            "questionable" => QualityFlag::Questionable,
            "substituted" => QualityFlag::Substituted,
            _ => QualityFlag::Questionable,
        }
    }

    pub fn as_code(self) -> &'static str {
        match self {
            QualityFlag::Good => "good",
            QualityFlag::Bad => "bad",
            QualityFlag::Questionable => "questionable",
            QualityFlag::Substituted => "substituted",
        }
    }
}

/// One archived reading. `value` is `None` for missing or non-finite input,
/// in which case the quality is always `Bad`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub time: Timestamp,
    pub value: Option<f64>,
    pub quality: QualityFlag,
}

impl Sample {
    pub fn new(time: Timestamp, value: f64, quality: QualityFlag) -> Self {
        if value.is_finite() {
            Sample {
                time,
                value: Some(value),
                quality,
            }
        } else {
            Sample::missing(time)
        }
    }

    pub fn good(time: Timestamp, value: f64) -> Self {
        Sample::new(time, value, QualityFlag::Good)
    }

    pub fn missing(time: Timestamp) -> Self {
        Sample {
            time,
            value: None,
            quality: QualityFlag::Bad,
        }
    }

    /// Usable as an interpolation anchor: has a value and is not `Bad`.
    pub fn is_anchor(&self) -> bool {
        self.value.is_some() && self.quality != QualityFlag::Bad
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentAction {
    Drop,
    Keep,
}

/// Un-gridded archive for one tag.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    tag: TagId,
    samples: Vec<Sample>,
}

impl RawSeries {
    /// Rejects non-increasing timestamps; non-finite values become `Bad` missing samples.
    pub fn new(tag: impl Into<TagId>, samples: Vec<Sample>) -> Result<Self> {
        let tag = tag.into();
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].time <= pair[0].time {
                return Err(Error::validation(format!(
                    "tag {tag}: timestamps not strictly increasing at index {} ({} after {})",
                    i + 1,
                    pair[1].time,
                    pair[0].time
                )));
            }
        }
        let samples = samples
            .into_iter()
            .map(|s| match s.value {
                Some(v) if v.is_finite() => s,
                _ => Sample::missing(s.time),
            })
            .collect();
        Ok(RawSeries { tag, samples })
    }

    /// All-`Good` series from `(time, value)` points.
    pub fn from_points(tag: impl Into<TagId>, points: &[(Timestamp, f64)]) -> Result<Self> {
        let samples = points.iter().map(|&(t, v)| Sample::good(t, v)).collect();
        RawSeries::new(tag, samples)
    }

    pub fn empty(tag: impl Into<TagId>) -> Self {
        RawSeries {
            tag: tag.into(),
            samples: Vec::new(),
        }
    }

    pub fn tag(&self) -> &TagId {
        &self.tag
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_time(&self) -> Option<Timestamp> {
        self.samples.first().map(|s| s.time)
    }

    pub fn last_time(&self) -> Option<Timestamp> {
        self.samples.last().map(|s| s.time)
    }

    pub fn with_tag(mut self, tag: impl Into<TagId>) -> Self {
        self.tag = tag.into();
        self
    }

    /// Samples with `start <= t < end`.
    pub fn slice(&self, start: Timestamp, end: Timestamp) -> RawSeries {
        let lo = self.samples.partition_point(|s| s.time < start);
        let hi = self.samples.partition_point(|s| s.time < end).max(lo);
        RawSeries {
            tag: self.tag.clone(),
            samples: self.samples[lo..hi].to_vec(),
        }
    }

    /// Every timestamp moved by `offset`.
    pub fn shifted(&self, offset: Duration) -> RawSeries {
        RawSeries {
            tag: self.tag.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    time: s.time + offset,
                    ..*s
                })
                .collect(),
        }
    }

    /// Applies `f` to present values; results that are not finite become missing.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> RawSeries {
        RawSeries {
            tag: self.tag.clone(),
            samples: self
                .samples
                .iter()
                .map(|s| match s.value {
                    Some(v) => Sample::new(s.time, f(v), s.quality),
                    None => *s,
                })
                .collect(),
        }
    }

    pub fn apply_segments(&self, segs: &[Segment], action: SegmentAction) -> Result<RawSeries> {
        validate_segments(segs)?;
        let samples = self
            .samples
            .iter()
            .filter(|s| in_any(segs, s.time) == (action == SegmentAction::Keep))
            .copied()
            .collect();
        Ok(RawSeries {
            tag: self.tag.clone(),
            samples,
        })
    }
}

/// Free-function form of [`RawSeries::slice`].
pub fn series_slice(s: &RawSeries, start: Timestamp, end: Timestamp) -> RawSeries {
    s.slice(start, end)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMethod {
    #[serde(rename = "zoh")]
    ZeroOrderHold,
    Linear,
}

impl GridMethod {
    pub fn as_code(self) -> &'static str {
        match self {
            GridMethod::ZeroOrderHold => "zoh",
            GridMethod::Linear => "linear",
        }
    }
}

impl FromStr for GridMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zoh" | "zero_order_hold" => Ok(GridMethod::ZeroOrderHold),
            "linear" => Ok(GridMethod::Linear),
            other => Err(Error::validation(format!("unknown grid method {other:?}"))),
        }
    }
}

/// Uniformly sampled series; index `k` sits at `start + k * interval`.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedSeries {
    tag: TagId,
    start: Timestamp,
    interval: Duration,
    values: Vec<Option<f64>>,
    method: GridMethod,
}

impl GriddedSeries {
    pub fn new(
        tag: impl Into<TagId>,
        start: Timestamp,
        interval: Duration,
        values: Vec<Option<f64>>,
        method: GridMethod,
    ) -> Result<Self> {
        let tag = tag.into();
        if !interval.is_positive() {
            return Err(Error::validation(format!(
                "tag {tag}: grid interval must be positive"
            )));
        }
        if values.is_empty() {
            return Err(Error::validation(format!(
                "tag {tag}: gridded series needs at least one point"
            )));
        }
        let values = values
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
        Ok(GriddedSeries {
            tag,
            start,
            interval,
            values,
            method,
        })
    }

    /// Convenience constructor with every value present.
    pub fn from_values(
        tag: impl Into<TagId>,
        start: Timestamp,
        interval: Duration,
        values: &[f64],
    ) -> Result<Self> {
        GriddedSeries::new(
            tag,
            start,
            interval,
            values.iter().map(|&v| Some(v)).collect(),
            GridMethod::ZeroOrderHold,
        )
    }

    pub fn tag(&self) -> &TagId {
        &self.tag
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub fn method(&self) -> GridMethod {
        self.method
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied().flatten()
    }

    pub fn time_at(&self, k: usize) -> Timestamp {
        self.start + self.interval * k as i64
    }

    /// Exclusive end of the grid, `start + len * interval`.
    pub fn end(&self) -> Timestamp {
        self.time_at(self.values.len())
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Index of the grid cell holding `t` (floor), if inside the grid.
    pub fn index_at(&self, t: Timestamp) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let k = (t - self.start).steps_of(self.interval) as usize;
        (k < self.values.len()).then_some(k)
    }

    /// Zero-order-hold lookup at an arbitrary time.
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        self.index_at(t).and_then(|k| self.values[k])
    }

    /// Same start, interval and length.
    pub fn same_grid(&self, other: &GriddedSeries) -> bool {
        self.start == other.start
            && self.interval == other.interval
            && self.values.len() == other.values.len()
    }

    pub fn with_tag(mut self, tag: impl Into<TagId>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn with_values(&self, values: Vec<Option<f64>>) -> Result<GriddedSeries> {
        GriddedSeries::new(
            self.tag.clone(),
            self.start,
            self.interval,
            values,
            self.method,
        )
    }

    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> GriddedSeries {
        GriddedSeries {
            values: self
                .values
                .iter()
                .map(|v| v.map(&mut f).filter(|x| x.is_finite()))
                .collect(),
            ..self.clone()
        }
    }

    /// Grid points as raw samples; absent points become `Bad` missing samples.
    pub fn to_raw(&self) -> RawSeries {
        RawSeries {
            tag: self.tag.clone(),
            samples: self
                .values
                .iter()
                .enumerate()
                .map(|(k, v)| match v {
                    Some(x) => Sample::good(self.time_at(k), *x),
                    None => Sample::missing(self.time_at(k)),
                })
                .collect(),
        }
    }

    /// Masks points rather than removing them, so the grid stays regular.
    pub fn apply_segments(&self, segs: &[Segment], action: SegmentAction) -> Result<GriddedSeries> {
        validate_segments(segs)?;
        let keep = action == SegmentAction::Keep;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if in_any(segs, self.time_at(k)) == keep {
                    *v
                } else {
                    None
                }
            })
            .collect();
        Ok(GriddedSeries {
            values,
            ..self.clone()
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentLabel {
    SteadyState,
    Transient,
    Shutdown,
    Anomaly,
    OpenLoop,
    ClosedLoop,
    Static,
    Compressed,
    Mode(u8),
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentLabel::SteadyState => f.write_str("steady_state"),
            SegmentLabel::Transient => f.write_str("transient"),
            SegmentLabel::Shutdown => f.write_str("shutdown"),
            SegmentLabel::Anomaly => f.write_str("anomaly"),
            SegmentLabel::OpenLoop => f.write_str("open_loop"),
            SegmentLabel::ClosedLoop => f.write_str("closed_loop"),
            SegmentLabel::Static => f.write_str("static"),
            SegmentLabel::Compressed => f.write_str("compressed"),
            SegmentLabel::Mode(k) => write!(f, "mode_{k}"),
        }
    }
}

impl FromStr for SegmentLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "steady_state" => SegmentLabel::SteadyState,
            "transient" => SegmentLabel::Transient,
            "shutdown" => SegmentLabel::Shutdown,
            "anomaly" => SegmentLabel::Anomaly,
            "open_loop" => SegmentLabel::OpenLoop,
            "closed_loop" => SegmentLabel::ClosedLoop,
            "static" => SegmentLabel::Static,
            "compressed" => SegmentLabel::Compressed,
            other => {
                let k = other
                    .strip_prefix("mode_")
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(|| Error::validation(format!("unknown segment label {other:?}")))?;
                SegmentLabel::Mode(k)
            }
        })
    }
}

impl Serialize for SegmentLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Labelled half-open interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Timestamp,
    pub end: Timestamp,
    pub label: SegmentLabel,
    pub evidence: Option<f64>,
}

impl Segment {
    pub fn new(start: Timestamp, end: Timestamp, label: SegmentLabel) -> Result<Self> {
        if start >= end {
            return Err(Error::validation(format!(
                "segment {label} has start {start} not before end {end}"
            )));
        }
        Ok(Segment {
            start,
            end,
            label,
            evidence: None,
        })
    }

    pub fn with_evidence(mut self, evidence: f64) -> Self {
        self.evidence = Some(evidence);
        self
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }

    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    /// Length of the intersection with `other`.
    pub fn overlap(&self, other: &Segment) -> Duration {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if hi > lo {
            hi - lo
        } else {
            Duration::ZERO
        }
    }
}

/// Checks `start < end`, ascending order and no overlap.
pub fn validate_segments(segs: &[Segment]) -> Result<()> {
    for s in segs {
        if s.start >= s.end {
            return Err(Error::validation(format!(
                "segment {} has empty or inverted span",
                s.label
            )));
        }
    }
    for pair in segs.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::validation(format!(
                "segments overlap or are unsorted: [{}, {}) and [{}, {})",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(())
}

fn in_any(segs: &[Segment], t: Timestamp) -> bool {
    // segs sorted and disjoint
    let idx = segs.partition_point(|s| s.end <= t);
    segs.get(idx).is_some_and(|s| s.contains(t))
}

/// Merges touching segments that share a label. Evidence is dropped on merge.
pub fn merge_adjacent(segs: Vec<Segment>) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    for s in segs {
        match out.last_mut() {
            Some(last) if last.label == s.label && last.end == s.start => {
                last.end = s.end;
                last.evidence = None;
            }
            _ => out.push(s),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagRole {
    #[serde(rename = "mv")]
    Mv,
    #[serde(rename = "cv")]
    Cv,
    #[serde(rename = "dv")]
    Dv,
    LabResult,
    LabIndicator,
    LabAcceptance,
    LoopMode,
    Prediction,
    Flow,
    Other,
}

/// Data source (historian, vendor system) a tag is archived by.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceId {
    pub name: String,
    pub declared_clock_offset: Option<Duration>,
}

impl SourceId {
    pub fn new(name: impl Into<String>) -> Self {
        SourceId {
            name: name.into(),
            declared_clock_offset: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TagMeta {
    pub tag: TagId,
    pub unit: String,
    pub role: TagRole,
    pub normal_range: Option<(f64, f64)>,
    pub source: String,
    pub scan_interval: Option<Duration>,
}

impl TagMeta {
    pub fn new(tag: impl Into<TagId>, source: impl Into<String>) -> Self {
        TagMeta {
            tag: tag.into(),
            unit: String::new(),
            role: TagRole::Other,
            normal_range: None,
            source: source.into(),
            scan_interval: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.normal_range {
            if !(lo < hi) {
                return Err(Error::validation(format!(
                    "tag {}: normal range lo {lo} must be below hi {hi}",
                    self.tag
                )));
            }
        }
        if let Some(scan) = self.scan_interval {
            if !scan.is_positive() {
                return Err(Error::validation(format!(
                    "tag {}: scan interval must be positive",
                    self.tag
                )));
            }
        }
        Ok(())
    }
}

/// One lab sample lifecycle: taken at `sample_time`, reported at `result_time`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabEvent {
    pub sample_time: Timestamp,
    pub sample_offset: Duration,
    pub result_time: Timestamp,
    pub value: f64,
    pub accepted: bool,
}

impl LabEvent {
    pub fn new(
        sample_time: Timestamp,
        sample_offset: Duration,
        result_time: Timestamp,
        value: f64,
        accepted: bool,
    ) -> Result<Self> {
        if sample_time >= result_time {
            return Err(Error::validation(format!(
                "lab sample at {sample_time} does not precede its result at {result_time}"
            )));
        }
        if sample_time + sample_offset >= result_time {
            return Err(Error::validation(format!(
                "effective sample time {} does not precede result at {result_time}",
                sample_time + sample_offset
            )));
        }
        if !value.is_finite() {
            return Err(Error::validation("lab value must be finite"));
        }
        Ok(LabEvent {
            sample_time,
            sample_offset,
            result_time,
            value,
            accepted,
        })
    }

    /// `t_i + Δt`, the time the prediction is compared at.
    pub fn effective_sample_time(&self) -> Timestamp {
        self.sample_time + self.sample_offset
    }
}
