// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reconstruct lab events from indicator tags and bias-correct a soft sensor.

use histprep::align::{bias_track, compute_residuals, correct_series, parse_lab_events, BiasState, LabParseOptions};
use histprep::model::{Duration, GriddedSeries, Timestamp};
use histprep::synth::{gen_lab_channel, regular_schedule, LabChannelParams};

fn main() -> histprep::Result<()> {
    let h = Duration::from_mins(1);
    let t0 = Timestamp::parse_iso("2024-01-01T00:00:00Z")?;
    let truth: Vec<f64> = (0..3000).map(|k| 2.0 + 0.2 * (k as f64 / 300.0).sin()).collect();
    let truth = GriddedSeries::from_values("AI300", t0, h, &truth)?;
    let prediction = truth.map_values(|v| v + 0.15).with_tag("AI300.PRED");

    let p = LabChannelParams::default();
    let ch = gen_lab_channel(&truth, &regular_schedule(t0 + Duration::from_hours(1), Duration::from_hours(4), 12), &p, 5)?;
    let parsed = parse_lab_events(&ch.indicator, &ch.results, Some(&ch.acceptance), &LabParseOptions::new(p.accept_window()))?;
    for e in &parsed.events {
        println!("sampled {} result {} value {:.3} accepted {}", e.sample_time, e.result_time, e.value, e.accepted);
    }
    let res = compute_residuals(&prediction, &parsed.events).residuals;
    let state = BiasState::new(0.3)?;
    let track: Vec<String> = bias_track(&res, &state).iter().map(|s| format!("{:.3}", s.b)).collect();
    println!("bias after each accepted result: {}", track.join(" "));
    let corrected = correct_series(&prediction, &res, &state)?;
    let k = corrected.len() - 1;
    println!(
        "final: truth {:.3}, raw prediction {:.3}, corrected {:.3}",
        truth.get(k).unwrap(),
        prediction.get(k).unwrap(),
        corrected.get(k).unwrap()
    );
    Ok(())
}
