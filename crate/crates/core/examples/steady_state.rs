// SPDX-License-Identifier: MIT OR Apache-2.0

//! Calibrate the R-statistic threshold and segment a step response.

use histprep::model::{Duration, Timestamp};
use histprep::steadystate::{calibrate_rcrit, segment_steady, RStatParams};
use histprep::synth::{gen_foptd, step_input, FoptdParams};

fn main() -> histprep::Result<()> {
    let base = RStatParams::default();
    let r_crit = calibrate_rcrit(&base, 0.01, 200_000, 42)?;
    println!("r_crit at alpha=0.01: {r_crit:.4}");

    let h = Duration::from_secs(10);
    let u = step_input(Timestamp::from_secs(0), h, 1200, 500, 0.0, 1.0)?;
    let plant = FoptdParams {
        gain: 2.0,
        time_constant: Duration::from_mins(2),
        dead_time: Duration::from_secs(40),
        noise_sigma: 0.02,
    };
    let y = gen_foptd(&plant, &u, 3)?.y;
    println!("step applied at {}", u.time_at(500));
    for s in segment_steady(&y, &base.with_r_crit(r_crit))? {
        println!("{} .. {} {}", s.start, s.end, s.label);
    }
    Ok(())
}
