// SPDX-License-Identifier: MIT OR Apache-2.0

//! Parse a long-format historian export, inspect resolution and grid with ZOH.

use histprep::ingest::{default_max_gap, detect_resolution, grid, parse_historian_csv, ParseOptions};
use histprep::model::{Duration, GridMethod, SourceId};

const EXPORT: &str = "\
timestamp,tag,value,quality
2024-01-01T00:00:00Z,FI100,100.2,good
2024-01-01T00:00:10Z,FI100,100.4,good
2024-01-01T00:00:20Z,FI100,,good
2024-01-01T00:00:30Z,FI100,101.0,bad
2024-01-01T00:00:40Z,FI100,100.9,good
2024-01-01T00:00:00Z,TI101,350.1,good
2024-01-01T00:00:30Z,TI101,350.6,good
not-a-time,TI101,1,good
";

fn main() -> histprep::Result<()> {
    let parsed = parse_historian_csv(EXPORT.as_bytes(), SourceId::new("dcs"), &ParseOptions { max_error_rate: 0.5 })?;
    let r = &parsed.report;
    println!("{} rows, {} malformed, {} missing values", r.rows, r.malformed.len(), r.missing_values);
    for m in &r.malformed {
        println!("  skipped {m:?}");
    }
    for (tag, s) in parsed.dataset.series() {
        let res = detect_resolution(s)?;
        let g = grid(s, s.first_time().unwrap(), Duration::from_secs(10), GridMethod::ZeroOrderHold, default_max_gap(s)?)?;
        let vals: Vec<String> = g.values().iter().map(|v| v.map_or("-".into(), |x| x.to_string())).collect();
        println!("{tag}: resolution {}, gridded [{}]", res.dominant, vals.join(", "));
    }
    Ok(())
}
