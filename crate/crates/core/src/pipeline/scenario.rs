// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline config matching the files written by `write_scenario`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use super::config::*;
use crate::diagnostics::{LoopMode, Sign};
use crate::ingest::Dataset;
use crate::model::{Duration, GridMethod, TagId, TagRole};
use crate::synth::{ScenarioConfig, MODE_AUTO, MODE_MAN};

/// Full processing chain for a generated scenario, reading `<source>.csv`
/// from the config's directory and writing to `output_dir`.
pub fn scenario_pipeline(cfg: &ScenarioConfig, dataset: &Dataset, output_dir: impl Into<PathBuf>) -> PipelineConfig {
    let mut p = PipelineConfig::new(format!("scenario-{}", cfg.seed), output_dir);
    p.seed = cfg.seed;
    let sources: BTreeSet<&str> = dataset.meta().values().map(|m| m.source.as_str()).collect();
    p.inputs = sources
        .iter()
        .map(|s| InputSpec::new(format!("{s}.csv"), *s))
        .collect();
    p.tag_meta = dataset
        .meta()
        .values()
        .map(|m| TagMetaOverride {
            tag: m.tag.clone(),
            unit: (!m.unit.is_empty()).then(|| m.unit.clone()),
            role: (m.role != TagRole::Other).then_some(m.role),
            normal_range: m.normal_range,
            scan_interval: m.scan_interval,
        })
        .collect();

    let q = |suffix: &str| TagId::new(format!("{}.{suffix}", cfg.quality.prefix));
    let c = &cfg.control;
    let t = &cfg.temperature;
    let field: Vec<TagId> = cfg.field.iter().map(|f| f.tag.clone()).collect();
    let mut continuous = vec![
        cfg.feed.tag.clone(),
        cfg.outflow.tag.clone(),
        t.tag.clone(),
        t.redundant_tag.clone(),
        q("PRED"),
        c.mv_tag.clone(),
        c.cv_tag.clone(),
    ];
    continuous.extend(field.iter().cloned());
    let levels: Vec<f64> = cfg.feed.plan.iter().map(|l| l.0).collect();
    let mut sorted = levels.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let thresholds: Vec<f64> = sorted.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
    let every = cfg.interval;

    let mut outlier_tags = vec![cfg.feed.tag.clone()];
    outlier_tags.extend(field.iter().cloned());
    let mut steps = vec![
        StepConfig::Clock(ClockStep {
            reference: t.tag.clone(),
            target: t.redundant_tag.clone(),
            interval: every,
            max_offset: Duration::from_mins(10),
            confidence_floor: 0.5,
            apply: true,
        }),
        StepConfig::Compression(CompressionStep {
            tags: continuous.clone(),
            nominal_scan: None,
            ratio_threshold: 3.0,
            linear_threshold: 0.8,
        }),
        StepConfig::Grid(GridStep {
            interval: every,
            method: GridMethod::ZeroOrderHold,
            max_gap: None,
            tags: continuous.clone(),
        }),
        StepConfig::Outliers(OutlierStep {
            tags: outlier_tags,
            k: 5.0,
            window: Some(every * 120),
            min_window_points: 8,
        }),
        StepConfig::Modes(ModesStep {
            tag: cfg.feed.tag.clone(),
            thresholds,
            min_duration: Duration::from_mins(10),
        }),
        StepConfig::Static(StaticStep {
            tags: continuous.clone(),
            noise_band: 1e-9,
            min_duration: Duration::from_mins(30),
        }),
        StepConfig::Steady(SteadyStep {
            tags: vec![cfg.feed.tag.clone(), t.tag.clone()],
            ..SteadyStep::default()
        }),
        StepConfig::Delay(DelayStep {
            input: cfg.feed.tag.clone(),
            output: t.tag.clone(),
            max_lag: Duration::from_mins(10),
            allow_negative: false,
            confidence_floor: 0.5,
            apply: false,
        }),
        StepConfig::Lab(LabStep {
            indicator: q("I"),
            result: q("Y"),
            acceptance: Some(q("A")),
            prediction: Some(q("PRED")),
            accept_window: cfg.quality.lab.accept_window(),
            delta_t: Duration::ZERO,
            level_tolerance: 1e-6,
            bias_alpha: crate::align::DEFAULT_BIAS_ALPHA,
            stale_after: Some(cfg.quality.every * 3),
        }),
        StepConfig::Balance(BalanceStep {
            name: "feed".into(),
            inputs: vec![cfg.feed.tag.clone()],
            outputs: vec![cfg.outflow.tag.clone()],
            window: Duration::from_hours(1),
            tolerance: 0.02,
            epsilon: 1e-9,
        }),
        StepConfig::Collinear(CollinearStep {
            tags: vec![cfg.feed.tag.clone(), cfg.outflow.tag.clone(), t.tag.clone(), t.redundant_tag.clone()],
            rho: 0.95,
            vif: 10.0,
        }),
        StepConfig::LoopMode(LoopModeStep {
            mode_tag: c.mode_tag.clone(),
            map: BTreeMap::from([
                ((MODE_MAN as i64).to_string(), LoopMode::Open),
                ((MODE_AUTO as i64).to_string(), LoopMode::Closed),
            ]),
            global_mode_tag: None,
            global_map: None,
            mv: Some(c.mv_tag.clone()),
            cv: Some(c.cv_tag.clone()),
            expected_sign: if c.plant.gain < 0.0 { Sign::Negative } else { Sign::Positive },
            differenced: false,
            min_pairs: 30,
        }),
    ];
    steps.push(StepConfig::Histogram(HistogramStep {
        tag: cfg.feed.tag.clone(),
        bins: 40,
    }));
    p.steps = steps;
    p
}
