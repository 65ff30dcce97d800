// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeMap;

use serde::Serialize;

use super::finding::{Finding, Severity};
use crate::ingest::{detect_resolution, Dataset};
use crate::model::{Segment, TagId};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SegmentTally {
    pub count: usize,
    pub total_secs: f64,
}

fn inventory(segs: &[Segment]) -> BTreeMap<String, SegmentTally> {
    let mut out: BTreeMap<String, SegmentTally> = BTreeMap::new();
    for s in segs {
        let t = out.entry(s.label.to_string()).or_default();
        t.count += 1;
        t.total_secs += s.duration().as_secs_f64();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TagSummary {
    pub tag: TagId,
    pub samples: usize,
    pub resolution_s: Option<f64>,
    /// Share of samples carrying a usable value, in percent.
    pub coverage_pct: f64,
    pub outliers: Option<usize>,
    pub segments: BTreeMap<String, SegmentTally>,
}

/// Everything the pipeline stages produced, keyed for aggregation.
#[derive(Clone, Debug, Default)]
pub struct ReportInputs {
    pub findings: Vec<Finding>,
    /// Keyed by tag name, or by any other scope name (e.g. `dataset`).
    pub segments: BTreeMap<String, Vec<Segment>>,
    pub outliers: BTreeMap<TagId, usize>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub report_schema_version: u32,
    pub dataset_id: String,
    pub findings: Vec<Finding>,
    pub tags: Vec<TagSummary>,
    /// Segment inventories for scopes that are not tags.
    pub scopes: BTreeMap<String, BTreeMap<String, SegmentTally>>,
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    pub fn max_severity(&self) -> Option<Severity> {
        self.findings.iter().map(|f| f.severity).min()
    }

    /// Canonical serialization: stable key order, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }
}

pub fn build_report(dataset_id: &str, d: &Dataset, inputs: ReportInputs) -> DiagnosticReport {
    let ReportInputs {
        mut findings,
        mut segments,
        outliers,
        notes,
    } = inputs;
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let tags = d
        .series()
        .iter()
        .map(|(tag, s)| {
            let usable = s.samples().iter().filter(|x| x.is_anchor()).count();
            let segs = segments.remove(tag.as_str()).unwrap_or_default();
            TagSummary {
                tag: tag.clone(),
                samples: s.len(),
                resolution_s: detect_resolution(s).ok().map(|r| r.dominant.as_secs_f64()),
                coverage_pct: if s.is_empty() {
                    0.0
                } else {
                    100.0 * usable as f64 / s.len() as f64
                },
                outliers: outliers.get(tag).copied(),
                segments: inventory(&segs),
            }
        })
        .collect();
    let scopes = segments
        .into_iter()
        .map(|(k, v)| (k, inventory(&v)))
        .collect();
    DiagnosticReport {
        report_schema_version: REPORT_SCHEMA_VERSION,
        dataset_id: dataset_id.to_string(),
        findings,
        tags,
        scopes,
        notes,
    }
}
