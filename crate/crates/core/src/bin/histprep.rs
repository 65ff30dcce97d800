// SPDX-License-Identifier: MIT OR Apache-2.0

//! `histprep` command line. Every pipeline subcommand is translated into a
//! one-step `PipelineConfig` and executed by the same runner as `run`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use histprep::diagnostics::{FindingKind, LoopMode, Severity, Sign};
use histprep::model::{Duration, GridMethod, TagId};
use histprep::pipeline::{
    run_config, run_pipeline, scenario_pipeline, BalanceStep, CollinearStep, DelayStep, GridStep,
    InputFormat, InputSpec, LabStep, LoopModeStep, OutlierStep, PipelineConfig, PipelineOutcome,
    RCrit, StaticStep, SteadyStep, StepConfig, EXIT_FAILURE, EXIT_FINDINGS, EXIT_OK,
};
use histprep::synth::{generate_scenario, write_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "histprep", version, about = "Process-historian data preparation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse historian exports and write the merged raw data.
    Ingest(PipelineArgs),
    /// Resample onto a uniform grid.
    Grid(GridCmd),
    /// Flag outliers, and optionally static stretches.
    Clean(CleanCmd),
    /// Label steady-state and transient stretches with the R statistic.
    Steady(SteadyCmd),
    /// Estimate (and optionally remove) the delay between two tags.
    Align(AlignCmd),
    /// Reconstruct lab events and bias-correct a prediction.
    Lab(LabCmd),
    /// Collinearity, balance closure and loop-mode diagnostics.
    Diagnose(DiagnoseCmd),
    /// Summarise a report.json; exits 2 if it holds Error findings.
    Report(ReportCmd),
    /// Generate a synthetic scenario with ground truth.
    Synth(SynthCmd),
    /// Run a pipeline config file.
    Run(RunCmd),
}

#[derive(Args)]
struct PipelineArgs {
    /// Input file as SOURCE=PATH; repeat for several sources.
    #[arg(long = "input", value_name = "SOURCE=PATH", required = true)]
    inputs: Vec<String>,
    /// Layout of every input file.
    #[arg(long, default_value = "long", value_parser = parse_format)]
    format: InputFormat,
    /// Declared clock lead of a source as SOURCE=DURATION.
    #[arg(long = "clock-offset", value_name = "SOURCE=DURATION")]
    clock_offsets: Vec<String>,
    #[arg(long, default_value_t = 0.01)]
    max_error_rate: f64,
    /// Severity override as KIND=error|warn|info.
    #[arg(long = "severity", value_name = "KIND=LEVEL")]
    severities: Vec<String>,
    #[arg(long, default_value = "dataset")]
    dataset_id: String,
    /// Seed for randomized steps.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "histprep-out")]
    out: PathBuf,
    /// Print the equivalent config file and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    interval: Duration,
    #[arg(long, default_value = "zoh")]
    method: GridMethod,
    #[arg(long)]
    max_gap: Option<Duration>,
    /// Tags to grid (default: all).
    #[arg(long = "grid-tag")]
    grid_tags: Vec<String>,
}

impl GridArgs {
    fn step(&self) -> StepConfig {
        StepConfig::Grid(GridStep {
            interval: self.interval,
            method: self.method,
            max_gap: self.max_gap,
            tags: tags(&self.grid_tags),
        })
    }
}

#[derive(Args)]
struct GridCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct CleanCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Tags to screen (default: all gridded).
    #[arg(long = "tag")]
    tags: Vec<String>,
    #[arg(long, default_value_t = 3.0)]
    k: f64,
    /// Trailing window; absent selects the global test.
    #[arg(long)]
    window: Option<Duration>,
    #[arg(long, default_value_t = 8)]
    min_window_points: usize,
    /// Also flag stretches whose spread stays within this band.
    #[arg(long, requires = "static_min")]
    static_band: Option<f64>,
    #[arg(long)]
    static_min: Option<Duration>,
}

#[derive(Args)]
struct SteadyCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long = "tag")]
    tags: Vec<String>,
    /// Critical value, or `auto` to calibrate at `--alpha`.
    #[arg(long, default_value_t = RCrit::default())]
    r_crit: RCrit,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 200_000)]
    calibration_draws: usize,
    #[arg(long, default_value_t = 0.2)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda2: f64,
    #[arg(long, default_value_t = 0.1)]
    lambda3: f64,
    #[arg(long, default_value_t = 3)]
    hold_count: usize,
    /// EWMA weight applied before the test (1 disables).
    #[arg(long)]
    presmooth: Option<f64>,
}

#[derive(Args)]
struct AlignCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long = "from")]
    input: String,
    #[arg(long = "to")]
    output: String,
    #[arg(long)]
    max_lag: Duration,
    #[arg(long)]
    allow_negative: bool,
    #[arg(long, default_value_t = 0.5)]
    confidence_floor: f64,
    /// Shift the output tag earlier by the estimated lag.
    #[arg(long)]
    apply: bool,
}

#[derive(Args)]
struct LabCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[arg(long)]
    indicator: String,
    #[arg(long)]
    result: String,
    #[arg(long)]
    acceptance: Option<String>,
    /// Gridded prediction to bias-correct; needs `--interval`.
    #[arg(long, requires = "interval")]
    prediction: Option<String>,
    #[arg(long)]
    interval: Option<Duration>,
    #[arg(long)]
    accept_window: Duration,
    #[arg(long, default_value = "0s")]
    delta_t: Duration,
    #[arg(long, default_value_t = 1e-6)]
    level_tolerance: f64,
    #[arg(long, default_value_t = histprep::align::DEFAULT_BIAS_ALPHA)]
    bias_alpha: f64,
    #[arg(long)]
    stale_after: Option<Duration>,
}

#[derive(Args)]
struct DiagnoseCmd {
    #[command(flatten)]
    common: PipelineArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Tags screened for collinearity.
    #[arg(long = "collinear")]
    collinear: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    #[arg(long, default_value_t = 10.0)]
    vif: f64,
    #[arg(long = "balance-in", requires_all = ["balance_out", "balance_window"])]
    balance_in: Vec<String>,
    #[arg(long = "balance-out")]
    balance_out: Vec<String>,
    #[arg(long)]
    balance_window: Option<Duration>,
    #[arg(long, default_value_t = 0.02)]
    balance_tolerance: f64,
    #[arg(long, default_value = "balance")]
    balance_name: String,
    #[arg(long, requires = "mode_map")]
    mode_tag: Option<String>,
    /// Mode code mapping as CODE=open|closed; repeat per code.
    #[arg(long = "mode-map")]
    mode_map: Vec<String>,
    #[arg(long, requires_all = ["cv", "mode_tag"])]
    mv: Option<String>,
    #[arg(long, requires = "mv")]
    cv: Option<String>,
    #[arg(long, default_value = "+", value_parser = parse_sign)]
    expected_sign: Sign,
    #[arg(long)]
    differenced: bool,
}

#[derive(Args)]
struct ReportCmd {
    /// A report.json written by a pipeline run.
    report: PathBuf,
}

#[derive(Args)]
struct SynthCmd {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "histprep-synth")]
    out: PathBuf,
}

#[derive(Args)]
struct RunCmd {
    #[arg(long)]
    config: PathBuf,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    match s {
        "long" => Ok(InputFormat::Long),
        "wide" => Ok(InputFormat::Wide),
        other => Err(format!("unknown format {other:?} (long|wide)")),
    }
}

fn parse_sign(s: &str) -> Result<Sign, String> {
    match s {
        "+" | "positive" => Ok(Sign::Positive),
        "-" | "negative" => Ok(Sign::Negative),
        other => Err(format!("unknown sign {other:?} (+|-)")),
    }
}

fn split_pair<'a>(s: &'a str, what: &str) -> Result<(&'a str, &'a str), String> {
    s.split_once('=')
        .filter(|(a, b)| !a.is_empty() && !b.is_empty())
        .ok_or_else(|| format!("{what} must look like KEY=VALUE, got {s:?}"))
}

fn tags(v: &[String]) -> Vec<TagId> {
    v.iter().map(TagId::new).collect()
}

fn string_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl PipelineArgs {
    fn config(&self, steps: Vec<StepConfig>) -> Result<PipelineConfig, String> {
        let mut cfg = PipelineConfig::new(self.dataset_id.clone(), self.out.clone());
        cfg.seed = self.seed;
        let mut offsets = BTreeMap::new();
        for o in &self.clock_offsets {
            let (src, d) = split_pair(o, "--clock-offset")?;
            let d: Duration = d.parse().map_err(|e| format!("--clock-offset {o}: {e}"))?;
            offsets.insert(src.to_string(), d);
        }
        for i in &self.inputs {
            let (src, path) = split_pair(i, "--input")?;
            let mut spec = InputSpec::new(path, src);
            spec.format = self.format;
            spec.max_error_rate = self.max_error_rate;
            spec.clock_offset = offsets.remove(src);
            cfg.inputs.push(spec);
        }
        if let Some(src) = offsets.keys().next() {
            return Err(format!("--clock-offset names source {src:?} without an --input"));
        }
        for s in &self.severities {
            let (kind, level) = split_pair(s, "--severity")?;
            let kind: FindingKind = string_enum(kind)?;
            let level: Severity = string_enum(level)?;
            cfg.severity.0.insert(kind, level);
        }
        cfg.steps = steps;
        Ok(cfg)
    }
}

fn steps_for(cmd: &Command) -> Result<(&PipelineArgs, Vec<StepConfig>, bool), String> {
    Ok(match cmd {
        Command::Ingest(c) => (c, Vec::new(), true),
        Command::Grid(c) => (&c.common, vec![c.grid.step()], false),
        Command::Clean(c) => {
            let mut steps = vec![
                c.grid.step(),
                StepConfig::Outliers(OutlierStep {
                    tags: tags(&c.tags),
                    k: c.k,
                    window: c.window,
                    min_window_points: c.min_window_points,
                }),
            ];
            if let (Some(band), Some(min)) = (c.static_band, c.static_min) {
                steps.push(StepConfig::Static(StaticStep {
                    tags: tags(&c.tags),
                    noise_band: band,
                    min_duration: min,
                }));
            }
            (&c.common, steps, false)
        }
        Command::Steady(c) => (
            &c.common,
            vec![
                c.grid.step(),
                StepConfig::Steady(SteadyStep {
                    tags: tags(&c.tags),
                    lambda1: c.lambda1,
                    lambda2: c.lambda2,
                    lambda3: c.lambda3,
                    r_crit: c.r_crit,
                    alpha: c.alpha,
                    calibration_draws: c.calibration_draws,
                    hold_count: c.hold_count,
                    presmooth: c.presmooth,
                }),
            ],
            false,
        ),
        Command::Align(c) => (
            &c.common,
            vec![
                c.grid.step(),
                StepConfig::Delay(DelayStep {
                    input: TagId::new(&c.input),
                    output: TagId::new(&c.output),
                    max_lag: c.max_lag,
                    allow_negative: c.allow_negative,
                    confidence_floor: c.confidence_floor,
                    apply: c.apply,
                }),
            ],
            false,
        ),
        Command::Lab(c) => {
            let mut steps = Vec::new();
            if let Some(interval) = c.interval {
                steps.push(StepConfig::Grid(GridStep {
                    interval,
                    method: GridMethod::ZeroOrderHold,
                    max_gap: None,
                    tags: c.prediction.iter().map(TagId::new).collect(),
                }));
            }
            steps.push(StepConfig::Lab(LabStep {
                indicator: TagId::new(&c.indicator),
                result: TagId::new(&c.result),
                acceptance: c.acceptance.as_ref().map(TagId::new),
                prediction: c.prediction.as_ref().map(TagId::new),
                accept_window: c.accept_window,
                delta_t: c.delta_t,
                level_tolerance: c.level_tolerance,
                bias_alpha: c.bias_alpha,
                stale_after: c.stale_after,
            }));
            (&c.common, steps, false)
        }
        Command::Diagnose(c) => {
            let mut steps = vec![c.grid.step()];
            if !c.collinear.is_empty() {
                steps.push(StepConfig::Collinear(CollinearStep {
                    tags: tags(&c.collinear),
                    rho: c.rho,
                    vif: c.vif,
                }));
            }
            if let Some(window) = c.balance_window {
                steps.push(StepConfig::Balance(BalanceStep {
                    name: c.balance_name.clone(),
                    inputs: tags(&c.balance_in),
                    outputs: tags(&c.balance_out),
                    window,
                    tolerance: c.balance_tolerance,
                    epsilon: 1e-9,
                }));
            }
            if let Some(mode_tag) = &c.mode_tag {
                let mut map = BTreeMap::new();
                for m in &c.mode_map {
                    let (code, state) = split_pair(m, "--mode-map")?;
                    let state: LoopMode = string_enum(state)?;
                    map.insert(code.to_string(), state);
                }
                steps.push(StepConfig::LoopMode(LoopModeStep {
                    mode_tag: TagId::new(mode_tag),
                    map,
                    global_mode_tag: None,
                    global_map: None,
                    mv: c.mv.as_ref().map(TagId::new),
                    cv: c.cv.as_ref().map(TagId::new),
                    expected_sign: c.expected_sign,
                    differenced: c.differenced,
                    min_pairs: 30,
                }));
            }
            (&c.common, steps, false)
        }
        Command::Report(_) | Command::Synth(_) | Command::Run(_) => unreachable!("not a pipeline step"),
    })
}

fn summarise(o: &PipelineOutcome) {
    let mut counts = BTreeMap::new();
    for f in &o.report.findings {
        *counts.entry(f.severity).or_insert(0usize) += 1;
    }
    let count = |s| counts.get(&s).copied().unwrap_or(0);
    println!(
        "{} artifacts written; findings: {} error, {} warn, {} info",
        o.written.len(),
        count(Severity::Error),
        count(Severity::Warn),
        count(Severity::Info)
    );
    for f in &o.report.findings {
        let tags: Vec<&str> = f.tags.iter().map(|t| t.as_str()).collect();
        println!("  [{:?}] {} {}: {}", f.severity, f.kind, tags.join(","), f.message);
    }
}

fn finish(r: histprep::Result<PipelineOutcome>) -> i32 {
    match r {
        Ok(o) => {
            summarise(&o);
            o.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn report(path: &Path) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    };
    let v: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_FAILURE;
        }
    };
    let empty = Vec::new();
    let findings = v["findings"].as_array().unwrap_or(&empty);
    println!(
        "dataset {} (schema {}): {} tags, {} findings",
        v["dataset_id"].as_str().unwrap_or("?"),
        v["report_schema_version"],
        v["tags"].as_array().map_or(0, |t| t.len()),
        findings.len()
    );
    let mut errors = 0;
    for f in findings {
        let sev = f["severity"].as_str().unwrap_or("?");
        errors += usize::from(sev == "error");
        println!("  [{sev}] {} {}: {}", f["kind"].as_str().unwrap_or("?"), f["tags"], f["message"].as_str().unwrap_or(""));
    }
    for t in v["tags"].as_array().unwrap_or(&empty) {
        println!(
            "  {:<16} samples {:>7} coverage {:>6.2}% outliers {}",
            t["tag"].as_str().unwrap_or("?"),
            t["samples"],
            t["coverage_pct"].as_f64().unwrap_or(0.0),
            t["outliers"]
        );
    }
    if errors > 0 {
        EXIT_FINDINGS
    } else {
        EXIT_OK
    }
}

fn synth(c: &SynthCmd) -> histprep::Result<()> {
    let mut cfg = ScenarioConfig::load(&c.scenario)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let s = generate_scenario(&cfg)?;
    let written = write_scenario(&s, &c.out)?;
    let pipeline = scenario_pipeline(&cfg, &s.dataset, "out");
    std::fs::write(c.out.join("pipeline.toml"), pipeline.to_toml())?;
    for (source, path) in written {
        println!("{source}: {}", path.display());
    }
    println!("manifest: {}", c.out.join("manifest.json").display());
    println!("pipeline: {}", c.out.join("pipeline.toml").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HISTPREP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE as u8 } else { EXIT_OK as u8 });
        }
    };
    let code = match &cli.command {
        Command::Report(c) => report(&c.report),
        Command::Synth(c) => match synth(c) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        },
        Command::Run(c) => finish(run_pipeline(&c.config)),
        cmd => match steps_for(cmd) {
            Ok((common, steps, raw)) => match common.config(steps) {
                Ok(mut cfg) => {
                    cfg.write_raw = raw;
                    if common.print_config {
                        print!("{}", cfg.to_toml());
                        EXIT_OK
                    } else {
                        finish(run_config(&cfg, Path::new(".")))
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_FAILURE
                }
            },
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_FAILURE
            }
        },
    };
    ExitCode::from(code as u8)
}
