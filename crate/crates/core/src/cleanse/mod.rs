// SPDX-License-Identifier: MIT OR Apache-2.0

//! Outliers, operating modes, shutdowns, static signals and compression artifacts.

mod compression;
mod modes;
mod outliers;

pub use compression::{
    detect_compression, CompressionFinding, CompressionParams, MIN_COMPRESSION_SAMPLES,
};
pub use modes::{detect_shutdown, detect_static, partition_modes, ShutdownScan};
pub use outliers::{detect_outliers_global, detect_outliers_moving, GlobalOutliers, OutlierParams};
pub use crate::stats::SeriesStats;
