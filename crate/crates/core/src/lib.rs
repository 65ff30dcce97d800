// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

pub mod align;
pub mod cleanse;
pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod steadystate;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    Duration, GridMethod, GriddedSeries, LabEvent, QualityFlag, RawSeries, Sample, Segment,
    SegmentAction, SegmentLabel, SourceId, TagId, TagMeta, TagRole, Timestamp,
};
