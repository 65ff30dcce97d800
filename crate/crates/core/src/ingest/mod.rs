// SPDX-License-Identifier: MIT OR Apache-2.0

//! Historian export parsing, gridding and clock reconciliation.

mod clock;
mod csv_io;
mod grid;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duration, RawSeries, SourceId, TagId, TagMeta};

pub use clock::{apply_clock_offset, estimate_clock_offset, ClockOffsetEstimate, ClockOffsetOptions};
pub use csv_io::{
    parse_historian_csv, parse_wide_csv, read_gridded_csv, write_gridded_csv,
    write_historian_csv, MalformedRow, ParseOptions, ParseReport, Parsed,
};
pub use grid::{default_max_gap, detect_resolution, grid, grid_n, Resolution};

/// Clock correction applied to every tag of one source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockCorrection {
    pub source: String,
    pub offset: Duration,
}

/// A set of raw series with their metadata and sources.
///
/// Every series has a `TagMeta` entry, and every meta names a known source.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    series: BTreeMap<TagId, RawSeries>,
    meta: BTreeMap<TagId, TagMeta>,
    sources: Vec<SourceId>,
    corrections: Vec<ClockCorrection>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_source(&mut self, source: SourceId) -> Result<()> {
        if self.sources.iter().any(|s| s.name == source.name) {
            return Err(Error::validation(format!(
                "duplicate source name {:?}",
                source.name
            )));
        }
        self.sources.push(source);
        Ok(())
    }

    /// Adds a series with its metadata, registering the source on first use.
    pub fn insert(&mut self, series: RawSeries, meta: TagMeta) -> Result<()> {
        if series.tag() != &meta.tag {
            return Err(Error::validation(format!(
                "metadata for {} attached to series {}",
                meta.tag,
                series.tag()
            )));
        }
        meta.validate()?;
        if self.source(&meta.source).is_none() {
            self.sources.push(SourceId::new(meta.source.clone()));
        }
        self.meta.insert(meta.tag.clone(), meta);
        self.series.insert(series.tag().clone(), series);
        Ok(())
    }

    /// Replaces the samples of an existing tag.
    pub fn replace_series(&mut self, series: RawSeries) -> Result<()> {
        match self.series.get_mut(series.tag()) {
            Some(slot) => {
                *slot = series;
                Ok(())
            }
            None => Err(Error::validation(format!("unknown tag {}", series.tag()))),
        }
    }

    pub fn set_meta(&mut self, meta: TagMeta) -> Result<()> {
        if !self.series.contains_key(&meta.tag) {
            return Err(Error::validation(format!("unknown tag {}", meta.tag)));
        }
        meta.validate()?;
        if self.source(&meta.source).is_none() {
            self.sources.push(SourceId::new(meta.source.clone()));
        }
        self.meta.insert(meta.tag.clone(), meta);
        Ok(())
    }

    /// Merges another fragment; tags must not collide.
    pub fn merge(&mut self, other: Dataset) -> Result<()> {
        for tag in other.series.keys() {
            if self.series.contains_key(tag) {
                return Err(Error::validation(format!("tag {tag} present in both fragments")));
            }
        }
        for src in other.sources {
            match self.sources.iter_mut().find(|s| s.name == src.name) {
                Some(existing) if existing.declared_clock_offset.is_none() => {
                    existing.declared_clock_offset = src.declared_clock_offset;
                }
                Some(_) => {}
                None => self.sources.push(src),
            }
        }
        self.series.extend(other.series);
        self.meta.extend(other.meta);
        self.corrections.extend(other.corrections);
        Ok(())
    }

    pub fn series(&self) -> &BTreeMap<TagId, RawSeries> {
        &self.series
    }

    pub fn meta(&self) -> &BTreeMap<TagId, TagMeta> {
        &self.meta
    }

    pub fn sources(&self) -> &[SourceId] {
        &self.sources
    }

    pub fn corrections(&self) -> &[ClockCorrection] {
        &self.corrections
    }

    pub fn get(&self, tag: &TagId) -> Option<&RawSeries> {
        self.series.get(tag)
    }

    pub fn require(&self, tag: &TagId) -> Result<&RawSeries> {
        self.series
            .get(tag)
            .ok_or_else(|| Error::validation(format!("unknown tag {tag}")))
    }

    pub fn source(&self, name: &str) -> Option<&SourceId> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn tags_of_source(&self, name: &str) -> Vec<TagId> {
        self.meta
            .values()
            .filter(|m| m.source == name)
            .map(|m| m.tag.clone())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub(crate) fn push_correction(&mut self, correction: ClockCorrection) {
        self.corrections.push(correction);
    }

    pub(crate) fn series_mut(&mut self) -> &mut BTreeMap<TagId, RawSeries> {
        &mut self.series
    }
}
