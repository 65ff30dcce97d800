// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::model::{Segment, TagId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Collinear,
    BalanceGap,
    StaticTag,
    CompressionSuspected,
    SignFlip,
    StaleBias,
    ResolutionMismatch,
}

impl FindingKind {
    pub const ALL: [FindingKind; 7] = [
        FindingKind::Collinear,
        FindingKind::BalanceGap,
        FindingKind::StaticTag,
        FindingKind::CompressionSuspected,
        FindingKind::SignFlip,
        FindingKind::StaleBias,
        FindingKind::ResolutionMismatch,
    ];

    pub fn default_severity(self) -> Severity {
        match self {
            FindingKind::ResolutionMismatch => Severity::Info,
            _ => Severity::Warn,
        }
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Ordered most severe first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warn,
    Info,
}

fn ser_evidence<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        if v.is_finite() {
            m.serialize_entry(k, v)?;
        } else if v.is_nan() {
            m.serialize_entry(k, "nan")?;
        } else if *v > 0.0 {
            m.serialize_entry(k, "inf")?;
        } else {
            m.serialize_entry(k, "-inf")?;
        }
    }
    m.end()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub severity: Severity,
    pub tags: Vec<TagId>,
    #[serde(serialize_with = "ser_evidence")]
    pub evidence: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Segment>,
    pub message: String,
}

impl Finding {
    pub fn new(kind: FindingKind, tags: Vec<TagId>, message: impl Into<String>) -> Self {
        debug_assert!(!tags.is_empty());
        Finding {
            kind,
            severity: kind.default_severity(),
            tags,
            evidence: BTreeMap::new(),
            segments: Vec::new(),
            message: message.into(),
        }
    }

    pub fn with_evidence(mut self, key: &str, value: f64) -> Self {
        self.evidence.insert(key.to_string(), value);
        self
    }

    pub fn with_segments(mut self, segs: Vec<Segment>) -> Self {
        self.segments = segs;
        self
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    pub(crate) fn sort_key(&self) -> (Severity, &[TagId], FindingKind, &str) {
        (self.severity, &self.tags, self.kind, &self.message)
    }
}

/// Per-kind severity overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeverityPolicy(pub BTreeMap<FindingKind, Severity>);

impl SeverityPolicy {
    pub fn severity(&self, kind: FindingKind) -> Severity {
        self.0.get(&kind).copied().unwrap_or(kind.default_severity())
    }

    pub fn apply(&self, findings: &mut [Finding]) {
        for f in findings {
            f.severity = self.severity(f.kind);
        }
    }
}
