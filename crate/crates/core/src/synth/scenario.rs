// SPDX-License-Identifier: MIT OR Apache-2.0

//! The full demo plant: a four-mode feed, a flow balance, redundant
//! temperatures on two systems, a quality with lab sampling and a soft-sensor
//! prediction, one PI loop that starts in manual, and assorted field tags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::defects::{inject_defects, DefectSpec, DelayTruth, TruthManifest};
use super::lab::{gen_lab_channel, regular_schedule, LabChannelParams};
use super::plant::{gen_closed_loop, gen_foptd, gen_open_loop, Disturbance, FoptdParams, PiParams, PrbsParams};
use super::signals::{gen_mode_signal, gen_smooth_noise, ModeSignalParams};
use super::{derive_seed, rng_for};
use crate::error::{Error, Result};
use crate::ingest::{write_historian_csv, Dataset};
use crate::model::{Duration, GriddedSeries, RawSeries, Segment, SegmentLabel, SourceId, TagId, TagMeta, TagRole, Timestamp};
use rand_distr::{Distribution, StandardNormal};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedSection {
    pub tag: TagId,
    pub plan: Vec<(f64, usize)>,
    pub ramp_steps: usize,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutflowSection {
    pub tag: TagId,
    pub time_constant: Duration,
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureSection {
    pub tag: TagId,
    pub redundant_tag: TagId,
    pub redundant_source: String,
    pub base: f64,
    pub plant: FoptdParams,
    pub redundant_noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySection {
    /// Prefix for `<prefix>.I`, `<prefix>.Y`, `<prefix>.A` and `<prefix>.PRED`.
    pub prefix: String,
    pub source: String,
    pub base: f64,
    pub plant: FoptdParams,
    pub prediction_offset: f64,
    pub prediction_noise: f64,
    pub first_sample: Duration,
    pub every: Duration,
    pub samples: usize,
    pub lab: LabChannelParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub mv_tag: TagId,
    pub cv_tag: TagId,
    pub mode_tag: TagId,
    pub plant: FoptdParams,
    pub setpoint: f64,
    pub pi: PiParams,
    pub disturbance: Disturbance,
    pub prbs: PrbsParams,
    /// Leading steps in manual with PRBS moves.
    pub open_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub tag: TagId,
    pub base: f64,
    pub scale: f64,
    pub phi: f64,
    pub noise_sigma: f64,
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_version: u32,
    pub seed: u64,
    pub start: Timestamp,
    pub interval: Duration,
    pub steps: usize,
    pub feed: FeedSection,
    pub outflow: OutflowSection,
    pub temperature: TemperatureSection,
    pub quality: QualitySection,
    #[serde(rename = "loop")]
    pub control: LoopSection,
    #[serde(default)]
    pub field: Vec<FieldSection>,
    #[serde(default)]
    pub defects: Vec<DefectSpec>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.scenario_version != SCENARIO_VERSION {
            return Err(Error::Config(format!(
                "scenario_version {} is not supported (expected {SCENARIO_VERSION})",
                cfg.scenario_version
            )));
        }
        if cfg.steps < 2 || !cfg.interval.is_positive() {
            return Err(Error::Config("steps >= 2 and a positive interval are required".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

/// Generated plant data grouped by historian source, plus ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub dataset: Dataset,
    pub manifest: TruthManifest,
}

fn grid_of(cfg: &ScenarioConfig, tag: &TagId, v: &[f64]) -> Result<GriddedSeries> {
    GriddedSeries::from_values(tag.clone(), cfg.start, cfg.interval, v)
}

fn dense(g: &GriddedSeries) -> Vec<f64> {
    g.values().iter().map(|v| v.expect("generated series are dense")).collect()
}

fn meta(tag: &TagId, source: &str, unit: &str, role: TagRole, cfg: &ScenarioConfig) -> TagMeta {
    let mut m = TagMeta::new(tag.clone(), source);
    m.unit = unit.to_string();
    m.role = role;
    m.scan_interval = Some(cfg.interval);
    m
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let seed = |stream: u64| derive_seed(cfg.seed, stream);
    let n = cfg.steps;
    let mut d = Dataset::new();
    for s in ["dcs", cfg.temperature.redundant_source.as_str(), cfg.quality.source.as_str()] {
        if d.source(s).is_none() {
            d.add_source(SourceId::new(s))?;
        }
    }
    let mut manifest = TruthManifest {
        seed: cfg.seed,
        ..TruthManifest::default()
    };

    // feed and balance
    let feed = gen_mode_signal(
        &ModeSignalParams {
            start: cfg.start,
            interval: cfg.interval,
            plan: cfg.feed.plan.clone(),
            ramp_steps: cfg.feed.ramp_steps,
            sigma: 0.0,
        },
        seed(1),
    )?;
    if feed.series.len() < n {
        return Err(Error::Config(format!(
            "feed plan covers {} steps, scenario needs {n}",
            feed.series.len()
        )));
    }
    let feed_clean: Vec<f64> = dense(&feed.series)[..n].to_vec();
    let feed_clean = grid_of(cfg, &cfg.feed.tag, &feed_clean)?;
    manifest
        .mode_boundaries
        .insert(cfg.feed.tag.clone(), feed.boundaries.iter().copied().filter(|t| *t < feed_clean.end()).collect());
    let mut rng = rng_for(cfg.seed, 100);
    let mut noisy = |v: &[f64], sigma: f64| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x + sigma * e
            })
            .collect()
    };
    let feed_vals = noisy(&dense(&feed_clean), cfg.feed.sigma);
    let out_plant = FoptdParams {
        gain: 1.0,
        time_constant: cfg.outflow.time_constant,
        dead_time: Duration::ZERO,
        noise_sigma: cfg.outflow.noise_sigma,
    };
    let outflow = gen_foptd(&out_plant, &feed_clean, seed(2))?.y;
    d.insert(
        grid_of(cfg, &cfg.feed.tag, &feed_vals)?.to_raw(),
        meta(&cfg.feed.tag, "dcs", "t/h", TagRole::Flow, cfg),
    )?;
    d.insert(
        outflow.with_tag(cfg.outflow.tag.clone()).to_raw(),
        meta(&cfg.outflow.tag, "dcs", "t/h", TagRole::Flow, cfg),
    )?;

    // redundant temperatures
    let t = &cfg.temperature;
    let mut t_plant = t.plant.clone();
    t_plant.noise_sigma = 0.0;
    let centered = feed_clean.map_values(|v| v - cfg.feed.plan[0].0);
    let temp_clean: Vec<f64> = dense(&gen_foptd(&t_plant, &centered, seed(3))?.y)
        .iter()
        .map(|v| t.base + v)
        .collect();
    let ta = noisy(&temp_clean, t.plant.noise_sigma);
    let tb = noisy(&temp_clean, t.redundant_noise);
    d.insert(grid_of(cfg, &t.tag, &ta)?.to_raw(), meta(&t.tag, "dcs", "degC", TagRole::Cv, cfg))?;
    d.insert(
        grid_of(cfg, &t.redundant_tag, &tb)?.to_raw(),
        meta(&t.redundant_tag, &t.redundant_source, "degC", TagRole::Cv, cfg),
    )?;
    manifest.dead_times.push(DelayTruth {
        u: cfg.feed.tag.clone(),
        y: t.tag.clone(),
        dead_time: t.plant.dead_time,
        steps: t.plant.dead_steps(cfg.interval),
    });

    // quality, lab channel and soft-sensor prediction
    let q = &cfg.quality;
    let mut q_plant = q.plant.clone();
    q_plant.noise_sigma = 0.0;
    let q_truth_vals: Vec<f64> = dense(&gen_foptd(&q_plant, &centered, seed(4))?.y)
        .iter()
        .map(|v| q.base + v)
        .collect();
    let q_truth = grid_of(cfg, &TagId::new(format!("{}.TRUE", q.prefix)), &q_truth_vals)?;
    let schedule = regular_schedule(cfg.start + q.first_sample, q.every, q.samples);
    let lab = gen_lab_channel(&q_truth, &schedule, &q.lab, seed(5))?;
    let pred: Vec<f64> = noisy(&q_truth_vals, q.prediction_noise)
        .iter()
        .map(|v| v + q.prediction_offset)
        .collect();
    let tag = |suffix: &str| TagId::new(format!("{}.{suffix}", q.prefix));
    for (series, suffix, role) in [
        (lab.indicator, "I", TagRole::LabIndicator),
        (lab.results, "Y", TagRole::LabResult),
        (lab.acceptance, "A", TagRole::LabAcceptance),
    ] {
        d.insert(series.with_tag(tag(suffix)), meta(&tag(suffix), &q.source, "", role, cfg))?;
    }
    d.insert(grid_of(cfg, &tag("PRED"), &pred)?.to_raw(), meta(&tag("PRED"), "dcs", "wt%", TagRole::Prediction, cfg))?;
    manifest.lab_events.insert(tag("Y"), lab.events);
    manifest.dead_times.push(DelayTruth {
        u: cfg.feed.tag.clone(),
        y: tag("TRUE"),
        dead_time: q.plant.dead_time,
        steps: q.plant.dead_steps(cfg.interval),
    });

    // PI loop: manual with PRBS moves, then automatic
    let c = &cfg.control;
    if c.open_steps == 0 || c.open_steps >= n {
        return Err(Error::Config("loop.open_steps must split the scenario".into()));
    }
    let open = gen_open_loop(&c.plant, &c.prbs, cfg.start, cfg.interval, c.open_steps, &c.disturbance, seed(6))?;
    let closed_start = cfg.start + cfg.interval * c.open_steps as i64;
    let sp = GriddedSeries::from_values("SP", closed_start, cfg.interval, &vec![c.setpoint; n - c.open_steps])?;
    let closed = gen_closed_loop(&c.plant, &c.pi, &sp, &c.disturbance, seed(7))?;
    let join = |a: &GriddedSeries, b: &GriddedSeries| [dense(a), dense(b)].concat();
    d.insert(grid_of(cfg, &c.mv_tag, &join(&open.mv, &closed.mv))?.to_raw(), meta(&c.mv_tag, "dcs", "%", TagRole::Mv, cfg))?;
    d.insert(grid_of(cfg, &c.cv_tag, &join(&open.cv, &closed.cv))?.to_raw(), meta(&c.cv_tag, "dcs", "", TagRole::Cv, cfg))?;
    let mode_samples = [open.mode.samples(), closed.mode.samples()].concat();
    d.insert(RawSeries::new(c.mode_tag.clone(), mode_samples)?, meta(&c.mode_tag, "dcs", "", TagRole::LoopMode, cfg))?;
    let end = cfg.start + cfg.interval * n as i64;
    manifest.loop_modes.insert(
        c.mode_tag.clone(),
        vec![
            Segment::new(cfg.start, closed_start, SegmentLabel::OpenLoop)?,
            Segment::new(closed_start, end, SegmentLabel::ClosedLoop)?,
        ],
    );
    manifest
        .gain_signs
        .insert(format!("{}->{}", c.mv_tag, c.cv_tag), c.plant.gain.signum() as i8);
    manifest.dead_times.push(DelayTruth {
        u: c.mv_tag.clone(),
        y: c.cv_tag.clone(),
        dead_time: c.plant.dead_time,
        steps: c.plant.dead_steps(cfg.interval),
    });

    // independent field instruments
    for (i, f) in cfg.field.iter().enumerate() {
        let base = gen_smooth_noise(cfg.start, cfg.interval, n, f.phi, seed(20 + i as u64))?;
        let v: Vec<f64> = dense(&base).iter().map(|x| f.base + f.scale * x).collect();
        let v = noisy(&v, f.noise_sigma);
        d.insert(grid_of(cfg, &f.tag, &v)?.to_raw(), meta(&f.tag, "dcs", &f.unit, TagRole::Other, cfg))?;
    }

    let (dataset, injected) = inject_defects(&d, &cfg.defects)?;
    manifest.defects = injected.defects;
    Ok(Scenario { dataset, manifest })
}

/// Writes one long-format CSV per source plus `manifest.json`.
pub fn write_scenario(s: &Scenario, dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut by_source: BTreeMap<&str, Vec<&RawSeries>> = BTreeMap::new();
    for (tag, series) in s.dataset.series() {
        by_source
            .entry(s.dataset.meta()[tag].source.as_str())
            .or_default()
            .push(series);
    }
    for (source, series) in by_source {
        let path = dir.join(format!("{source}.csv"));
        let file = std::io::BufWriter::new(fs::File::create(&path)?);
        write_historian_csv(file, series)?;
        written.push((source.to_string(), path));
    }
    let manifest = serde_json::to_string_pretty(&s.manifest).map_err(|e| Error::Generation(e.to_string()))?;
    fs::write(dir.join("manifest.json"), manifest + "\n")?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = include_str!("../../scenarios/full.toml");

    #[test]
    fn canonical_scenario_parses_and_generates() {
        let mut cfg = ScenarioConfig::from_toml(FULL).unwrap();
        cfg.steps = 4000;
        cfg.control.open_steps = 1000;
        cfg.quality.samples = 3;
        cfg.defects.clear();
        let s = generate_scenario(&cfg).unwrap();
        assert!(s.dataset.series().len() >= 10);
        assert_eq!(s.manifest.lab_events.values().next().unwrap().len(), 3);
        assert_eq!(generate_scenario(&cfg).unwrap(), s);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{FULL}\nsurprise = 1\n");
        assert!(matches!(ScenarioConfig::from_toml(&bad), Err(Error::Config(_))));
    }
}
