// SPDX-License-Identifier: MIT OR Apache-2.0

//! Global k-sigma versus a moving window on a two-mode series with spikes.

use histprep::cleanse::{detect_outliers_global, detect_outliers_moving, OutlierParams};
use histprep::synth::{gen_two_mode, TwoModeParams};

fn main() -> histprep::Result<()> {
    let tm = gen_two_mode(&TwoModeParams::default(), 1)?;
    let global = detect_outliers_global(&tm.series, &OutlierParams::global(3.0))?;
    let window = tm.series.interval() * 60;
    let moving = detect_outliers_moving(&tm.series, &OutlierParams::moving(5.0, window))?;
    println!("injected spikes: {:?}", tm.spikes);
    println!("excursion: {:?}", tm.excursion);
    println!("global 3-sigma: {} flags (mean {:.3}, sigma {:.3})", global.indices.len(), global.stats.mean, global.stats.std_dev);
    println!("moving k=5 over {window}: {:?}", moving);
    Ok(())
}
