// SPDX-License-Identifier: MIT OR Apache-2.0

//! Operating modes, shutdowns and frozen stretches on one feed signal.

use histprep::cleanse::{detect_shutdown, detect_static, partition_modes};
use histprep::model::{Duration, GriddedSeries, Timestamp};

fn main() -> histprep::Result<()> {
    let h = Duration::from_mins(1);
    let mut v = Vec::new();
    v.extend((0..180).map(|k| 100.0 + (k as f64 * 0.7).sin()));
    v.extend((0..60).map(|_| 0.5));
    v.extend((0..240).map(|k| 120.0 + (k as f64 * 0.3).cos()));
    v.extend((0..5).map(|_| 2.0));
    v.extend((0..120).map(|_| 120.25));
    let g = GriddedSeries::from_values("FI100", Timestamp::parse_iso("2024-01-01T00:00:00Z")?, h, &v)?;

    for s in partition_modes(&g, &[50.0, 110.0], Duration::from_mins(10))? {
        println!("mode     {} .. {} {}", s.start, s.end, s.label);
    }
    let scan = detect_shutdown(&g, 10.0, Duration::from_mins(30))?;
    for s in scan.shutdowns.iter().chain(&scan.anomalies) {
        println!("low flow {} .. {} {}", s.start, s.end, s.label);
    }
    for s in detect_static(&g, 1e-9, Duration::from_mins(60))? {
        println!("frozen   {} .. {} ({})", s.start, s.end, s.duration());
    }
    Ok(())
}
