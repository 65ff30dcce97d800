// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimate an input-output dead time from PRBS data and realign the output.

use histprep::align::{apply_shift, estimate_delay, DelayOptions};
use histprep::model::{Duration, Timestamp};
use histprep::synth::{gen_foptd, gen_prbs, FoptdParams, PrbsParams};

fn main() -> histprep::Result<()> {
    let h = Duration::from_secs(5);
    let u = gen_prbs(&PrbsParams { bias: 0.0, amplitude: 1.0, hold_steps: 1 }, Timestamp::from_secs(0), h, 2000, 11)?;
    let plant = FoptdParams {
        gain: 1.5,
        time_constant: Duration::from_secs(30),
        dead_time: Duration::from_secs(45),
        noise_sigma: 0.05,
    };
    let y = gen_foptd(&plant, &u, 11)?.y;
    let est = estimate_delay(&u, &y, Duration::from_mins(3), &DelayOptions::default())?;
    println!(
        "lag {} steps ({}), peak corr {:.3}, confident {}",
        est.lag, est.lag_duration, est.peak_corr, est.confident
    );
    let aligned = apply_shift(&y, -est.lag)?;
    let again = estimate_delay(&u, &aligned, Duration::from_mins(3), &DelayOptions::default())?;
    println!("after realignment: lag {} steps", again.lag);
    Ok(())
}
