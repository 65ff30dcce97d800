// SPDX-License-Identifier: MIT OR Apache-2.0

//! Generate the demo plant with defects, then run the full pipeline over it.
//!
//! `cargo run --example synth_scenario -- [output dir]`

use histprep::pipeline::{run_pipeline, scenario_pipeline};
use histprep::synth::{generate_scenario, write_scenario, ScenarioConfig};

fn main() -> histprep::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "histprep-scenario".into());
    let dir = std::path::Path::new(&dir);
    let cfg = ScenarioConfig::from_toml(include_str!("../scenarios/full.toml"))?;
    let s = generate_scenario(&cfg)?;
    write_scenario(&s, dir)?;
    for d in &s.manifest.defects {
        println!("injected {} on {}", d.kind, d.target);
    }
    std::fs::write(dir.join("pipeline.toml"), scenario_pipeline(&cfg, &s.dataset, "out").to_toml())?;
    let outcome = run_pipeline(&dir.join("pipeline.toml"))?;
    for f in &outcome.report.findings {
        println!("[{:?}] {}: {}", f.severity, f.kind, f.message);
    }
    println!("{} artifacts, exit code {}", outcome.written.len(), outcome.exit_code);
    Ok(())
}
