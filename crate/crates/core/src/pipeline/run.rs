// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sequential step execution. Artifacts are collected in memory and written
//! once at the end, so a run either leaves a complete set or fails early.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{debug, info};

use super::config::{
    file_safe, BalanceStep, ClockStep, CollinearStep, CompressionStep, DelayStep, GridStep,
    HistogramStep, InputFormat, LabStep, LoopModeStep, ModesStep, OutlierStep, PipelineConfig,
    RCrit, ShutdownStep, StaticStep, SteadyStep, StepConfig,
};
use crate::align::{
    apply_shift, compute_residuals, correct_series, estimate_delay, parse_lab_events,
    write_lab_audit_csv, BiasState, DelayOptions, LabParseOptions,
};
use crate::cleanse::{
    detect_compression, detect_outliers_global, detect_outliers_moving, detect_shutdown,
    detect_static, partition_modes, CompressionParams, OutlierParams,
};
use crate::diagnostics::{
    balance_closure, build_report, closed_loop_sign_check, combine_loop_modes, flag_collinear,
    segment_loop_mode, BalanceParams, CollinearParams, DiagnosticReport, Finding, FindingKind,
    ModeMap, ReportInputs, Severity, SignCheckParams,
};
use crate::error::{Error, Result};
use crate::ingest::{
    apply_clock_offset, default_max_gap, detect_resolution, estimate_clock_offset, grid_n,
    parse_historian_csv, parse_wide_csv, write_gridded_csv, write_historian_csv,
    ClockOffsetOptions, Dataset, ParseOptions,
};
use crate::model::{Duration, GriddedSeries, Segment, SegmentLabel, SourceId, TagId, Timestamp};
use crate::steadystate::{calibrate_rcrit, segment_steady};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_FINDINGS: i32 = 2;

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub report: DiagnosticReport,
    /// Every file written, sorted by path.
    pub written: Vec<PathBuf>,
    /// 0 without Error findings, 2 with.
    pub exit_code: i32,
}

/// Loads `config_path` and runs it; relative paths resolve against its directory.
pub fn run_pipeline(config_path: &Path) -> Result<PipelineOutcome> {
    let cfg = PipelineConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_config(&cfg, base)
}

/// Exit status for a finished or failed run.
pub fn exit_code(r: &Result<PipelineOutcome>) -> i32 {
    match r {
        Ok(o) => o.exit_code,
        Err(_) => EXIT_FAILURE,
    }
}

pub fn run_config(cfg: &PipelineConfig, base_dir: &Path) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let data = ingest(cfg, base_dir)?;
    check_tags(cfg, &data)?;
    let mut run = Run {
        cfg,
        data,
        gridded: BTreeMap::new(),
        inputs: ReportInputs::default(),
        files: BTreeMap::new(),
        delays: Vec::new(),
    };
    let notes = std::mem::take(&mut run.data.notes);
    run.inputs.notes.extend(notes);
    for (i, step) in cfg.steps.iter().enumerate() {
        info!("step {i}: {}", step.name());
        run.step(step).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("steps[{i}] ({}): {m}", step.name())),
            other => other,
        })?;
    }
    run.finish(base_dir)
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    data: IngestedData,
    gridded: BTreeMap<TagId, GriddedSeries>,
    inputs: ReportInputs,
    files: BTreeMap<String, String>,
    delays: Vec<String>,
}

struct IngestedData {
    dataset: Dataset,
    notes: Vec<String>,
}

impl std::ops::Deref for Run<'_> {
    type Target = Dataset;
    fn deref(&self) -> &Dataset {
        &self.data.dataset
    }
}

fn ingest(cfg: &PipelineConfig, base: &Path) -> Result<IngestedData> {
    let mut d = Dataset::new();
    let mut notes = Vec::new();
    for inp in &cfg.inputs {
        let path = base.join(&inp.path);
        let file = fs::File::open(&path)
            .map_err(|e| Error::Config(format!("input {}: {e}", path.display())))?;
        let source = SourceId {
            name: inp.source.clone(),
            declared_clock_offset: inp.clock_offset,
        };
        let opts = ParseOptions {
            max_error_rate: inp.max_error_rate,
        };
        let reader = BufReader::new(file);
        let parsed = match inp.format {
            InputFormat::Long => parse_historian_csv(reader, source, &opts),
            InputFormat::Wide => parse_wide_csv(reader, source, &opts),
        }
        .map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", inp.path.display()),
            },
            other => other,
        })?;
        let r = &parsed.report;
        notes.push(format!(
            "ingest {}: {} rows, {} malformed, {} missing values",
            inp.path.display(),
            r.rows,
            r.malformed.len(),
            r.missing_values
        ));
        d.merge(parsed.dataset)?;
    }
    let mut corrected = std::collections::BTreeSet::new();
    for inp in &cfg.inputs {
        if let Some(off) = inp.clock_offset.filter(|o| *o != Duration::ZERO) {
            if corrected.insert(inp.source.clone()) {
                d = apply_clock_offset(&d, &inp.source, -off)?;
                notes.push(format!("source {}: declared clock offset {off} removed", inp.source));
            }
        }
    }
    for o in &cfg.tag_meta {
        let mut m = d
            .meta()
            .get(&o.tag)
            .cloned()
            .ok_or_else(|| Error::Config(format!("tag_meta: unknown tag {}", o.tag)))?;
        if let Some(u) = &o.unit {
            m.unit = u.clone();
        }
        if let Some(r) = o.role {
            m.role = r;
        }
        if o.normal_range.is_some() {
            m.normal_range = o.normal_range;
        }
        if o.scan_interval.is_some() {
            m.scan_interval = o.scan_interval;
        }
        d.set_meta(m)?;
    }
    Ok(IngestedData { dataset: d, notes })
}

fn check_tags(cfg: &PipelineConfig, d: &IngestedData) -> Result<()> {
    for (i, s) in cfg.steps.iter().enumerate() {
        if let Some(t) = s.referenced_tags().into_iter().find(|t| d.dataset.get(t).is_none()) {
            return Err(Error::Config(format!("steps[{i}] ({}): unknown tag {t}", s.name())));
        }
    }
    Ok(())
}

fn csv_f(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn safe_name(tag: &TagId) -> String {
    let name = tag.as_str();
    if file_safe(name) {
        return name.to_string();
    }
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn or_all(tags: &[TagId], all: impl Iterator<Item = TagId>) -> Vec<TagId> {
    if tags.is_empty() {
        all.collect()
    } else {
        tags.to_vec()
    }
}

impl Run<'_> {
    fn note(&mut self, n: String) {
        debug!("{n}");
        self.inputs.notes.push(n);
    }

    fn add_segments(&mut self, scope: &TagId, segs: impl IntoIterator<Item = Segment>) {
        self.inputs
            .segments
            .entry(scope.as_str().to_string())
            .or_default()
            .extend(segs);
    }

    fn gridded(&self, tag: &TagId) -> Result<&GriddedSeries> {
        self.gridded
            .get(tag)
            .ok_or_else(|| Error::Config(format!("tag {tag} was not gridded")))
    }

    fn gridded_tags(&self, tags: &[TagId]) -> Result<Vec<TagId>> {
        let tags = or_all(tags, self.gridded.keys().cloned());
        for t in &tags {
            self.gridded(t)?;
        }
        Ok(tags)
    }

    fn step(&mut self, step: &StepConfig) -> Result<()> {
        match step {
            StepConfig::Clock(s) => self.clock(s),
            StepConfig::Grid(s) => self.grid(s),
            StepConfig::Compression(s) => self.compression(s),
            StepConfig::Outliers(s) => self.outliers(s),
            StepConfig::Modes(s) => self.modes(s),
            StepConfig::Shutdown(s) => self.shutdown(s),
            StepConfig::Static(s) => self.static_tags(s),
            StepConfig::Steady(s) => self.steady(s),
            StepConfig::Delay(s) => self.delay(s),
            StepConfig::Lab(s) => self.lab(s),
            StepConfig::Balance(s) => self.balance(s),
            StepConfig::Collinear(s) => self.collinear(s),
            StepConfig::LoopMode(s) => self.loop_mode(s),
            StepConfig::Histogram(s) => self.histogram(s),
        }
    }

    fn clock(&mut self, s: &ClockStep) -> Result<()> {
        let a = self.require(&s.reference)?;
        let b = self.require(&s.target)?;
        let mut opts = ClockOffsetOptions::new(s.interval);
        opts.confidence_floor = s.confidence_floor;
        let est = estimate_clock_offset(a, b, s.max_offset, &opts)?;
        let source = self.meta()[&s.target].source.clone();
        if self.meta()[&s.reference].source == source {
            return Err(Error::Config(format!(
                "{} and {} share source {source}",
                s.reference, s.target
            )));
        }
        let mut rows = self.files.remove("clock.csv").unwrap_or_else(|| {
            "reference,target,source,offset_s,lag_steps,confidence,low_confidence,applied\n".into()
        });
        let apply = s.apply && !est.low_confidence;
        writeln!(
            rows,
            "{},{},{source},{},{},{},{},{apply}",
            s.reference,
            s.target,
            est.offset.as_secs_f64(),
            est.lag_steps,
            est.confidence,
            est.low_confidence
        )
        .expect("string write");
        self.files.insert("clock.csv".into(), rows);
        self.note(format!(
            "clock: {} runs {} ahead of {} (confidence {:.3}{})",
            source,
            est.offset,
            s.reference,
            est.confidence,
            if est.low_confidence { ", low" } else { "" }
        ));
        if apply && est.offset != Duration::ZERO {
            self.data.dataset = apply_clock_offset(&self.data.dataset, &source, -est.offset)?;
            self.note(format!("clock: shifted source {source} by {}", -est.offset));
        }
        Ok(())
    }

    fn grid(&mut self, s: &GridStep) -> Result<()> {
        let tags = or_all(&s.tags, self.series().keys().cloned());
        let start = tags
            .iter()
            .filter_map(|t| self.series()[t].first_time())
            .min()
            .ok_or_else(|| Error::not_enough("no samples to grid"))?;
        let last = tags
            .iter()
            .filter_map(|t| self.series()[t].last_time())
            .max()
            .expect("a first time implies a last time");
        let len = (last - start).steps_of(s.interval) as usize + 1;
        let mut out = BTreeMap::new();
        let mut findings = Vec::new();
        for t in &tags {
            let raw = &self.series()[t];
            let res = detect_resolution(raw).ok().map(|r| r.dominant);
            let max_gap = match s.max_gap {
                Some(g) => g,
                None => default_max_gap(raw).unwrap_or(s.interval * 4).max(s.interval),
            };
            if let Some(r) = res.filter(|r| *r > s.interval * 2) {
                findings.push(
                    Finding::new(
                        FindingKind::ResolutionMismatch,
                        vec![t.clone()],
                        format!("archived every {r} but gridded at {}", s.interval),
                    )
                    .with_evidence("resolution_s", r.as_secs_f64())
                    .with_evidence("interval_s", s.interval.as_secs_f64()),
                );
            }
            out.insert(t.clone(), grid_n(raw, start, s.interval, len, s.method, max_gap)?);
        }
        self.gridded = out;
        self.inputs.findings.extend(findings);
        self.note(format!("grid: {} tags, {len} points every {} from {start}", tags.len(), s.interval));
        Ok(())
    }

    fn compression(&mut self, s: &CompressionStep) -> Result<()> {
        let explicit = !s.tags.is_empty();
        let tags = or_all(&s.tags, self.series().keys().cloned());
        let p = CompressionParams {
            ratio_threshold: s.ratio_threshold,
            linear_threshold: s.linear_threshold,
            ..CompressionParams::default()
        };
        let mut rows = String::from("tag,archival_ratio,linear_fraction,suspected\n");
        for t in &tags {
            let Some(scan) = s.nominal_scan.or(self.meta()[t].scan_interval) else {
                if explicit {
                    return Err(Error::Config(format!("tag {t} has no scan_interval; set nominal_scan")));
                }
                continue;
            };
            let raw = &self.series()[t];
            let f = match detect_compression(raw, scan, &p) {
                Ok(f) => f,
                Err(Error::NotEnoughData(m)) => {
                    self.note(format!("compression: {t} skipped: {m}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            writeln!(rows, "{t},{},{},{}", f.archival_ratio, f.linear_fraction, f.suspected)
                .expect("string write");
            if f.suspected {
                let span = (raw.first_time(), raw.last_time());
                let mut finding = Finding::new(
                    FindingKind::CompressionSuspected,
                    vec![t.clone()],
                    format!(
                        "archive looks compressed: mean spacing {:.2}x scan, {:.0}% of samples on chords",
                        f.archival_ratio,
                        100.0 * f.linear_fraction
                    ),
                )
                .with_evidence("archival_ratio", f.archival_ratio)
                .with_evidence("linear_fraction", f.linear_fraction);
                if let (Some(a), Some(b)) = span {
                    if let Ok(seg) = Segment::new(a, b + scan, SegmentLabel::Compressed) {
                        finding = finding.with_segments(vec![seg]);
                        self.add_segments(t, [seg]);
                    }
                }
                self.inputs.findings.push(finding);
            }
        }
        self.files.insert("compression.csv".into(), rows);
        Ok(())
    }

    fn outliers(&mut self, s: &OutlierStep) -> Result<()> {
        let tags = self.gridded_tags(&s.tags)?;
        let p = OutlierParams {
            k: s.k,
            window: s.window,
            min_window_points: s.min_window_points,
        };
        let method = if s.window.is_some() { "moving" } else { "global" };
        let mut rows = self
            .files
            .remove("outliers.csv")
            .unwrap_or_else(|| "tag,timestamp,value,method\n".into());
        for t in &tags {
            let g = &self.gridded[t];
            let found = match s.window {
                None => detect_outliers_global(g, &p).map(|o| (o.indices, o.warning)),
                Some(_) => detect_outliers_moving(g, &p).map(|i| (i, None)),
            };
            let (idx, warning) = match found {
                Ok(v) => v,
                Err(Error::NotEnoughData(m)) => {
                    self.note(format!("outliers: {t} skipped: {m}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            for &k in &idx {
                writeln!(rows, "{t},{},{},{method}", g.time_at(k), csv_f(g.get(k))).expect("string write");
            }
            *self.inputs.outliers.entry(t.clone()).or_default() += idx.len();
            if let Some(w) = warning {
                self.note(format!("outliers: {t}: {w}"));
            }
        }
        self.files.insert("outliers.csv".into(), rows);
        Ok(())
    }

    fn modes(&mut self, s: &ModesStep) -> Result<()> {
        let segs = partition_modes(self.gridded(&s.tag)?, &s.thresholds, s.min_duration)?;
        self.note(format!("modes: {} segments on {}", segs.len(), s.tag));
        self.add_segments(&s.tag, segs);
        Ok(())
    }

    fn shutdown(&mut self, s: &ShutdownStep) -> Result<()> {
        let scan = detect_shutdown(self.gridded(&s.tag)?, s.threshold, s.min_duration)?;
        self.note(format!(
            "shutdown: {} shutdowns, {} short sub-threshold anomalies on {}",
            scan.shutdowns.len(),
            scan.anomalies.len(),
            s.tag
        ));
        self.add_segments(&s.tag, scan.shutdowns.into_iter().chain(scan.anomalies));
        Ok(())
    }

    fn static_tags(&mut self, s: &StaticStep) -> Result<()> {
        for t in self.gridded_tags(&s.tags)? {
            let segs = detect_static(&self.gridded[&t], s.noise_band, s.min_duration)?;
            if segs.is_empty() {
                continue;
            }
            let longest = segs.iter().map(|x| x.duration()).max().expect("non-empty");
            let total: f64 = segs.iter().map(|x| x.duration().as_secs_f64()).sum();
            self.inputs.findings.push(
                Finding::new(
                    FindingKind::StaticTag,
                    vec![t.clone()],
                    format!("{} static stretch(es), longest {longest}", segs.len()),
                )
                .with_evidence("longest_s", longest.as_secs_f64())
                .with_evidence("total_s", total)
                .with_segments(segs.clone()),
            );
            self.add_segments(&t, segs);
        }
        Ok(())
    }

    fn steady(&mut self, s: &SteadyStep) -> Result<()> {
        let tags = self.gridded_tags(&s.tags)?;
        let r_crit = match s.r_crit {
            RCrit::Value(v) => v,
            RCrit::Auto => {
                let v = calibrate_rcrit(&s.rstat_params(2.0), s.alpha, s.calibration_draws, self.cfg.seed)?;
                self.note(format!(
                    "steady: r_crit calibrated to {v:.5} at alpha {} ({} draws, seed {})",
                    s.alpha, s.calibration_draws, self.cfg.seed
                ));
                v
            }
        };
        let p = s.rstat_params(r_crit);
        for t in tags {
            let g = &self.gridded[&t];
            let segs = match s.presmooth {
                Some(w) => segment_steady(&ewma(g, w), &p)?,
                None => segment_steady(g, &p)?,
            };
            self.add_segments(&t, segs);
        }
        Ok(())
    }

    fn delay(&mut self, s: &DelayStep) -> Result<()> {
        let u = self.gridded(&s.input)?;
        let y = self.gridded(&s.output)?;
        let opts = DelayOptions {
            allow_negative: s.allow_negative,
            confidence_floor: s.confidence_floor,
        };
        let est = estimate_delay(u, y, s.max_lag, &opts)?;
        let shifted = if s.apply && est.lag != 0 {
            Some(apply_shift(y, -est.lag)?)
        } else {
            None
        };
        if self.delays.is_empty() {
            self.delays.push("input,output,lag_steps,lag_s,peak_corr,confident,applied".into());
        }
        self.delays.push(format!(
            "{},{},{},{},{},{},{}",
            s.input,
            s.output,
            est.lag,
            est.lag_duration.as_secs_f64(),
            est.peak_corr,
            est.confident,
            s.apply
        ));
        if !est.confident {
            self.note(format!(
                "delay: {} -> {} peak |corr| {:.3} below floor",
                s.input, s.output, est.peak_corr
            ));
        }
        if let Some(shifted) = shifted {
            self.gridded.insert(s.output.clone(), shifted);
            self.note(format!("delay: {} moved {} earlier", s.output, est.lag_duration));
        }
        Ok(())
    }

    fn data_end(&self) -> Option<Timestamp> {
        match self.gridded.values().next() {
            Some(g) => Some(g.end()),
            None => self.series().values().filter_map(|s| s.last_time()).max(),
        }
    }

    fn lab(&mut self, s: &LabStep) -> Result<()> {
        let opts = LabParseOptions {
            accept_window: s.accept_window,
            delta_t: s.delta_t,
            level_tolerance: s.level_tolerance,
        };
        let acceptance = s.acceptance.as_ref().map(|t| &self.series()[t]);
        let parsed = parse_lab_events(&self.series()[&s.indicator], &self.series()[&s.result], acceptance, &opts)?;
        let accepted = parsed.events.iter().filter(|e| e.accepted).count();
        let mut notes = vec![format!(
            "lab {}: {} events, {accepted} accepted, {} open cycles",
            s.result,
            parsed.events.len(),
            parsed.open.len()
        )];
        notes.extend(parsed.warnings.iter().map(|w| format!("lab {}: {w}", s.result)));
        let bias = BiasState::new(s.bias_alpha)?;
        let residuals = match &s.prediction {
            Some(pred) => {
                let y_hat = self.gridded(pred)?.clone();
                let res = compute_residuals(&y_hat, &parsed.events);
                notes.extend(res.warnings.iter().map(|w| format!("lab {}: {w}", s.result)));
                let corrected = correct_series(&y_hat, &res.residuals, &bias)?;
                let tag = TagId::new(format!("{pred}.CORR"));
                self.gridded.insert(tag.clone(), corrected.with_tag(tag));
                res.residuals
            }
            None => Vec::new(),
        };
        let mut buf = Vec::new();
        write_lab_audit_csv(&mut buf, &parsed.events, &residuals, &bias)?;
        self.files.insert(
            format!("lab_{}.csv", safe_name(&s.result)),
            String::from_utf8(buf).expect("csv output is UTF-8"),
        );
        for n in notes {
            self.note(n);
        }
        if let (Some(horizon), Some(end)) = (s.stale_after, self.data_end()) {
            self.stale_bias(s, horizon, end, &parsed.events);
        }
        Ok(())
    }

    fn stale_bias(&mut self, s: &LabStep, horizon: Duration, end: Timestamp, events: &[crate::model::LabEvent]) {
        let mut times: Vec<Timestamp> = events.iter().filter(|e| e.accepted).map(|e| e.result_time).collect();
        times.sort();
        let start = self.series()[&s.result]
            .first_time()
            .into_iter()
            .chain(self.series()[&s.indicator].first_time())
            .min()
            .unwrap_or(end);
        let mut marks = vec![start];
        marks.extend(&times);
        marks.push(end);
        let mut stale = Vec::new();
        let mut worst = Duration::ZERO;
        for w in marks.windows(2) {
            let gap = w[1] - w[0];
            worst = worst.max(gap);
            if gap > horizon {
                if let Ok(seg) = Segment::new(w[0] + horizon, w[1], SegmentLabel::Anomaly) {
                    stale.push(seg);
                }
            }
        }
        if stale.is_empty() {
            return;
        }
        self.inputs.findings.push(
            Finding::new(
                FindingKind::StaleBias,
                vec![s.result.clone()],
                format!("bias held without an accepted result for up to {worst} (limit {horizon})"),
            )
            .with_evidence("max_gap_s", worst.as_secs_f64())
            .with_evidence("stale_after_s", horizon.as_secs_f64())
            .with_evidence("stale_stretches", stale.len() as f64)
            .with_segments(stale),
        );
    }

    fn balance(&mut self, s: &BalanceStep) -> Result<()> {
        let pick = |tags: &[TagId]| -> Result<Vec<GriddedSeries>> {
            tags.iter().map(|t| self.gridded(t).cloned()).collect()
        };
        let ins = pick(&s.inputs)?;
        let outs = pick(&s.outputs)?;
        let mut p = BalanceParams::new(s.window, s.tolerance);
        p.epsilon = s.epsilon;
        let res = balance_closure(&ins, &outs, self.meta(), &p)?;
        let mut rows = String::from("start,end,sum_in,sum_out,imbalance,status\n");
        for w in &res.windows {
            let status = serde_json::to_value(w.status).expect("unit variant");
            writeln!(
                rows,
                "{},{},{},{},{},{}",
                w.start,
                w.end,
                w.sum_in,
                w.sum_out,
                csv_f(w.imbalance),
                status.as_str().expect("string")
            )
            .expect("string write");
        }
        self.files.insert(format!("balance_{}.csv", s.name), rows);
        let gaps = res.windows.iter().filter(|w| w.status == crate::diagnostics::WindowStatus::Gap).count();
        self.note(format!("balance {}: {gaps} of {} windows outside tolerance", s.name, res.windows.len()));
        self.inputs.findings.extend(res.findings);
        Ok(())
    }

    fn collinear(&mut self, s: &CollinearStep) -> Result<()> {
        let series: Vec<GriddedSeries> = s
            .tags
            .iter()
            .map(|t| self.gridded(t).cloned())
            .collect::<Result<_>>()?;
        let p = CollinearParams {
            rho_threshold: s.rho,
            vif_threshold: s.vif,
        };
        match flag_collinear(&series, &p) {
            Ok(f) => self.inputs.findings.extend(f),
            Err(Error::NotEnoughData(m)) => self.note(format!("collinear: skipped: {m}")),
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn loop_mode(&mut self, s: &LoopModeStep) -> Result<()> {
        let to_map = |m: &BTreeMap<String, crate::diagnostics::LoopMode>| -> ModeMap {
            m.iter()
                .map(|(k, v)| (k.trim().parse().expect("validated"), *v))
                .collect()
        };
        let until = self.data_end();
        let mut segs = segment_loop_mode(&self.series()[&s.mode_tag], &to_map(&s.map), until)?;
        if let (Some(gt), Some(gm)) = (&s.global_mode_tag, &s.global_map) {
            let global = segment_loop_mode(&self.series()[gt], &to_map(gm), until)?;
            segs = combine_loop_modes(&global, &segs)?;
        }
        if let (Some(mv), Some(cv)) = (&s.mv, &s.cv) {
            let p = SignCheckParams {
                expected_open_loop_sign: s.expected_sign,
                min_pairs: s.min_pairs,
                differenced: s.differenced,
            };
            let check = closed_loop_sign_check(self.gridded(mv)?, self.gridded(cv)?, &segs, &p)?;
            self.note(format!(
                "loop {mv} -> {cv}: open-loop rho {} over {} pairs, closed-loop rho {} over {} pairs",
                check.open_rho.map_or("n/a".into(), |r| format!("{r:.3}")),
                check.open_pairs,
                check.closed_rho.map_or("n/a".into(), |r| format!("{r:.3}")),
                check.closed_pairs
            ));
            for n in check.notes {
                self.note(format!("loop {mv} -> {cv}: {n}"));
            }
            self.inputs.findings.extend(check.findings);
        }
        self.add_segments(&s.mode_tag, segs);
        Ok(())
    }

    fn histogram(&mut self, s: &HistogramStep) -> Result<()> {
        let g = self.gridded(&s.tag)?;
        let present: Vec<(Timestamp, f64)> = (0..g.len())
            .filter_map(|k| g.get(k).map(|v| (g.time_at(k), v)))
            .collect();
        let lo = present.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = present.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if present.is_empty() {
            self.note(format!("histogram: {} has no present values", s.tag));
            return Ok(());
        }
        let width = if hi > lo { (hi - lo) / s.bins as f64 } else { 1.0 };
        let bin = |v: f64| (((v - lo) / width) as usize).min(s.bins - 1);
        let modes: Vec<Segment> = self
            .inputs
            .segments
            .get(s.tag.as_str())
            .map(|v| v.iter().filter(|x| matches!(x.label, SegmentLabel::Mode(_))).copied().collect())
            .unwrap_or_default();
        let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        counts.insert("all".into(), vec![0; s.bins]);
        for &(t, v) in &present {
            counts.get_mut("all").expect("inserted")[bin(v)] += 1;
            if let Some(m) = modes.iter().find(|m| m.contains(t)) {
                counts.entry(m.label.to_string()).or_insert_with(|| vec![0; s.bins])[bin(v)] += 1;
            }
        }
        let mut rows = String::from("scope,bin_lo,bin_hi,count\n");
        for (scope, c) in &counts {
            for (i, n) in c.iter().enumerate() {
                let a = lo + width * i as f64;
                writeln!(rows, "{scope},{a},{},{n}", a + width).expect("string write");
            }
        }
        self.files.insert(format!("hist_{}.csv", safe_name(&s.tag)), rows);
        Ok(())
    }

    fn finish(mut self, base_dir: &Path) -> Result<PipelineOutcome> {
        self.cfg.severity.apply(&mut self.inputs.findings);
        let mut seg_rows = String::from("scope,label,start,end,evidence\n");
        for (scope, segs) in &mut self.inputs.segments {
            segs.sort_by_key(|a| (a.start, a.label, a.end));
            for x in segs.iter() {
                writeln!(seg_rows, "{scope},{},{},{},{}", x.label, x.start, x.end, csv_f(x.evidence))
                    .expect("string write");
            }
        }
        self.files.insert("segments.csv".into(), seg_rows);
        if !self.delays.is_empty() {
            let mut d = self.delays.join("\n");
            d.push('\n');
            self.files.insert("delays.csv".into(), d);
        }
        if !self.gridded.is_empty() {
            let mut buf = Vec::new();
            write_gridded_csv(&mut buf, self.gridded.values())?;
            self.files.insert("gridded.csv".into(), String::from_utf8(buf).expect("UTF-8"));
        }
        if self.cfg.write_raw && !self.is_empty() {
            let mut buf = Vec::new();
            write_historian_csv(&mut buf, self.series().values())?;
            self.files.insert("raw.csv".into(), String::from_utf8(buf).expect("UTF-8"));
        }
        let inputs = std::mem::take(&mut self.inputs);
        let report = build_report(&self.cfg.dataset_id, &self.data.dataset, inputs);
        self.files.insert("report.json".into(), report.to_json());

        let out_dir = base_dir.join(&self.cfg.output_dir);
        fs::create_dir_all(&out_dir)?;
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let path = out_dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
        }
        let exit_code = if report.max_severity() == Some(Severity::Error) {
            EXIT_FINDINGS
        } else {
            EXIT_OK
        };
        info!("wrote {} artifacts to {}", written.len(), out_dir.display());
        Ok(PipelineOutcome {
            report,
            written,
            exit_code,
        })
    }
}

/// Exponentially weighted smoothing; absent points stay absent and do not reset the filter.
fn ewma(g: &GriddedSeries, w: f64) -> GriddedSeries {
    let mut state: Option<f64> = None;
    let values = g
        .values()
        .iter()
        .map(|v| {
            v.map(|x| {
                let y = state.map_or(x, |prev| w * x + (1.0 - w) * prev);
                state = Some(y);
                y
            })
        })
        .collect();
    g.with_values(values).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Duration, GridMethod, Timestamp};

    #[test]
    fn ewma_skips_gaps_without_reset() {
        let g = GriddedSeries::new(
            "X",
            Timestamp::from_secs(0),
            Duration::from_secs(1),
            vec![Some(0.0), None, Some(4.0), Some(4.0)],
            GridMethod::ZeroOrderHold,
        )
        .unwrap();
        assert_eq!(ewma(&g, 0.5).values(), &[Some(0.0), None, Some(2.0), Some(3.0)]);
        assert_eq!(ewma(&g, 1.0).values(), g.values());
    }
}
