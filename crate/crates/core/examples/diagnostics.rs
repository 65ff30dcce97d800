// SPDX-License-Identifier: MIT OR Apache-2.0

//! Collinearity, flow balance and a closed-loop sign check, gathered in one report.

use std::collections::BTreeMap;

use histprep::diagnostics::{
    balance_closure, build_report, closed_loop_sign_check, flag_collinear, segment_loop_mode, BalanceParams,
    CollinearParams, LoopMode, ModeMap, ReportInputs, Sign, SignCheckParams,
};
use histprep::ingest::Dataset;
use histprep::model::{Duration, GriddedSeries, TagMeta, Timestamp};
use histprep::synth::{gen_closed_loop, gen_smooth_noise, Disturbance, FoptdParams, PiParams, MODE_AUTO};

fn main() -> histprep::Result<()> {
    let h = Duration::from_secs(5);
    let t0 = Timestamp::from_secs(0);
    let feed = gen_smooth_noise(t0, h, 2000, 0.98, 1)?.map_values(|v| 100.0 + 5.0 * v).with_tag("FI100");
    let meter_noise = gen_smooth_noise(t0, h, 2000, 0.0, 2)?;
    let outflow = feed
        .with_values(feed.values().iter().zip(meter_noise.values()).map(|(a, e)| Some(0.96 * a.unwrap() + 0.5 * e.unwrap())).collect())?
        .with_tag("FI200");
    let mut findings = flag_collinear(&[feed.clone(), outflow.clone()], &CollinearParams::default())?;

    let meta: BTreeMap<_, _> = [("FI100", "t/h"), ("FI200", "t/h")]
        .map(|(t, u)| {
            let mut m = TagMeta::new(t, "dcs");
            m.unit = u.into();
            (t.into(), m)
        })
        .into();
    let balance = balance_closure(std::slice::from_ref(&feed), std::slice::from_ref(&outflow), &meta, &BalanceParams::new(Duration::from_mins(30), 0.02))?;
    findings.extend(balance.findings);

    let plant = FoptdParams {
        gain: 2.0,
        time_constant: Duration::from_secs(60),
        dead_time: Duration::from_secs(20),
        noise_sigma: 0.05,
    };
    let sp = GriddedSeries::from_values("SP", t0, h, &vec![50.0; 2000])?;
    let lp = gen_closed_loop(&plant, &PiParams { kp: 0.3, ki: 0.01 }, &sp, &Disturbance { sigma: 0.5, phi: 0.95 }, 2)?;
    let map: ModeMap = [(MODE_AUTO as i64, LoopMode::Closed)].into();
    let segs = segment_loop_mode(&lp.mode, &map, Some(lp.mv.end()))?;
    let check = closed_loop_sign_check(&lp.mv, &lp.cv, &segs, &SignCheckParams::new(Sign::Positive))?;
    println!("{}", check.notes.join("\n"));
    findings.extend(check.findings);

    let mut d = Dataset::new();
    for g in [&feed, &outflow] {
        d.insert(g.to_raw(), meta[g.tag()].clone())?;
    }
    let report = build_report("diagnostics-example", &d, ReportInputs { findings, ..Default::default() });
    println!("{}", report.to_json());
    Ok(())
}
