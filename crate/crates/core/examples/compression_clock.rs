// SPDX-License-Identifier: MIT OR Apache-2.0

//! Spot a swinging-door archive and recover a skew between two historian clocks.

use histprep::cleanse::{detect_compression, CompressionParams};
use histprep::ingest::{apply_clock_offset, estimate_clock_offset, ClockOffsetOptions, Dataset};
use histprep::model::{Duration, TagMeta, Timestamp};
use histprep::synth::{gen_smooth_noise, inject_defects, swinging_door, DefectKind, DefectSpec};

fn main() -> histprep::Result<()> {
    let h = Duration::from_secs(5);
    let level = gen_smooth_noise(Timestamp::from_secs(0), h, 4000, 0.995, 8)?.map_values(|v| 50.0 + 5.0 * v);
    let raw = level.to_raw();
    for (name, s) in [("as scanned", raw.clone()), ("swinging door", swinging_door(&raw, 0.8)?)] {
        let c = detect_compression(&s, h, &CompressionParams::default())?;
        println!(
            "{name:>14}: {} samples, archival ratio {:.2}, linear fraction {:.2}, suspected {}",
            s.len(),
            c.archival_ratio,
            c.linear_fraction,
            c.suspected
        );
    }

    let mut d = Dataset::new();
    d.insert(level.clone().with_tag("TI101A").to_raw(), TagMeta::new("TI101A", "dcs"))?;
    d.insert(level.with_tag("TI101B").to_raw(), TagMeta::new("TI101B", "dcs2"))?;
    let skew = DefectSpec { target: "TI101B".into(), kind: DefectKind::ClockSkew { offset: Duration::from_secs(90) } };
    let (skewed, _) = inject_defects(&d, &[skew])?;
    let opts = ClockOffsetOptions::new(h);
    let est = estimate_clock_offset(skewed.require(&"TI101A".into())?, skewed.require(&"TI101B".into())?, Duration::from_mins(10), &opts)?;
    println!("dcs2 runs {} ahead (confidence {:.3})", est.offset, est.confidence);
    let fixed = apply_clock_offset(&skewed, "dcs2", -est.offset)?;
    let again = estimate_clock_offset(fixed.require(&"TI101A".into())?, fixed.require(&"TI101B".into())?, Duration::from_mins(10), &opts)?;
    println!("after correction: {}", again.offset);
    Ok(())
}
