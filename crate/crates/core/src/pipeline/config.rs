// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pipeline configuration. Parsing is strict: unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::diagnostics::{LoopMode, Sign, SeverityPolicy};
use crate::error::{Error, Result};
use crate::model::{Duration, GridMethod, TagId, TagRole};
use crate::steadystate::{RStatParams, DEFAULT_R_CRIT};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// `timestamp,tag,value[,quality]` rows.
    #[default]
    Long,
    /// One timestamp column followed by one column per tag.
    Wide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    pub source: String,
    #[serde(default)]
    pub format: InputFormat,
    /// How far this source's clock runs ahead of true time; removed on ingest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_offset: Option<Duration>,
    #[serde(default = "default_error_rate")]
    pub max_error_rate: f64,
}

fn default_error_rate() -> f64 {
    0.01
}

impl InputSpec {
    pub fn new(path: impl Into<PathBuf>, source: impl Into<String>) -> Self {
        InputSpec {
            path: path.into(),
            source: source.into(),
            format: InputFormat::Long,
            clock_offset: None,
            max_error_rate: default_error_rate(),
        }
    }
}

/// Overrides for the metadata of one ingested tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagMetaOverride {
    pub tag: TagId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<TagRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_interval: Option<Duration>,
}

/// Fixed critical value or Monte Carlo calibration at level `alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RCrit {
    Value(f64),
    Auto,
}

impl Default for RCrit {
    fn default() -> Self {
        RCrit::Value(DEFAULT_R_CRIT)
    }
}

impl FromStr for RCrit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(RCrit::Auto);
        }
        s.trim()
            .parse()
            .map(RCrit::Value)
            .map_err(|_| Error::validation(format!("r_crit must be a number or \"auto\", got {s:?}")))
    }
}

impl fmt::Display for RCrit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RCrit::Value(v) => write!(f, "{v}"),
            RCrit::Auto => f.write_str("auto"),
        }
    }
}

impl Serialize for RCrit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RCrit::Value(v) => s.serialize_f64(*v),
            RCrit::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for RCrit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = RCrit;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"auto\"")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<RCrit, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<RCrit, E> {
                Ok(RCrit::Value(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<RCrit, E> {
                Ok(RCrit::Value(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<RCrit, E> {
                Ok(RCrit::Value(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

fn default_k() -> f64 {
    3.0
}
fn default_min_points() -> usize {
    8
}
fn default_alpha() -> f64 {
    0.05
}
fn default_n_mc() -> usize {
    200_000
}
fn default_floor() -> f64 {
    0.5
}
fn default_bias_alpha() -> f64 {
    crate::align::DEFAULT_BIAS_ALPHA
}
fn default_level_tol() -> f64 {
    1e-6
}
fn default_epsilon() -> f64 {
    1e-9
}
fn default_rho() -> f64 {
    0.95
}
fn default_vif() -> f64 {
    10.0
}
fn default_min_pairs() -> usize {
    30
}
fn default_bins() -> usize {
    40
}
fn default_ratio() -> f64 {
    3.0
}
fn default_linear() -> f64 {
    0.8
}
fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockStep {
    /// Tag on the trusted clock.
    pub reference: TagId,
    /// Redundant tag whose whole source is corrected.
    pub target: TagId,
    pub interval: Duration,
    pub max_offset: Duration,
    #[serde(default = "default_floor")]
    pub confidence_floor: f64,
    #[serde(default = "yes")]
    pub apply: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridStep {
    pub interval: Duration,
    #[serde(default = "default_method")]
    pub method: GridMethod,
    /// Defaults to four times each tag's detected resolution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gap: Option<Duration>,
    /// Defaults to every ingested tag.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagId>,
}

fn default_method() -> GridMethod {
    GridMethod::ZeroOrderHold
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionStep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagId>,
    /// Defaults to each tag's configured scan interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_scan: Option<Duration>,
    #[serde(default = "default_ratio")]
    pub ratio_threshold: f64,
    #[serde(default = "default_linear")]
    pub linear_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierStep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagId>,
    #[serde(default = "default_k")]
    pub k: f64,
    /// Absent selects the global test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Duration>,
    #[serde(default = "default_min_points")]
    pub min_window_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesStep {
    pub tag: TagId,
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub min_duration: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShutdownStep {
    pub tag: TagId,
    pub threshold: f64,
    pub min_duration: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticStep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagId>,
    pub noise_band: f64,
    pub min_duration: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStep {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<TagId>,
    #[serde(default = "default_l1")]
    pub lambda1: f64,
    #[serde(default = "default_l23")]
    pub lambda2: f64,
    #[serde(default = "default_l23")]
    pub lambda3: f64,
    #[serde(default)]
    pub r_crit: RCrit,
    /// Significance level used when `r_crit = "auto"`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_mc")]
    pub calibration_draws: usize,
    #[serde(default = "default_hold")]
    pub hold_count: usize,
    /// EWMA weight in (0, 1] applied to the gridded values before the test.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presmooth: Option<f64>,
}

fn default_l1() -> f64 {
    0.2
}
fn default_l23() -> f64 {
    0.1
}
fn default_hold() -> usize {
    3
}

impl SteadyStep {
    pub fn rstat_params(&self, r_crit: f64) -> RStatParams {
        RStatParams {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            r_crit,
            hold_count: self.hold_count,
        }
    }
}

impl Default for SteadyStep {
    fn default() -> Self {
        SteadyStep {
            tags: Vec::new(),
            lambda1: default_l1(),
            lambda2: default_l23(),
            lambda3: default_l23(),
            r_crit: RCrit::default(),
            alpha: default_alpha(),
            calibration_draws: default_n_mc(),
            hold_count: default_hold(),
            presmooth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayStep {
    pub input: TagId,
    pub output: TagId,
    pub max_lag: Duration,
    #[serde(default)]
    pub allow_negative: bool,
    #[serde(default = "default_floor")]
    pub confidence_floor: f64,
    /// Shift the gridded output earlier by the estimated lag.
    #[serde(default)]
    pub apply: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabStep {
    pub indicator: TagId,
    pub result: TagId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<TagId>,
    /// Gridded soft-sensor prediction to bias-correct.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<TagId>,
    pub accept_window: Duration,
    #[serde(default)]
    pub delta_t: Duration,
    #[serde(default = "default_level_tol")]
    pub level_tolerance: f64,
    #[serde(default = "default_bias_alpha")]
    pub bias_alpha: f64,
    /// Longest tolerated time without an accepted result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stale_after: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceStep {
    pub name: String,
    pub inputs: Vec<TagId>,
    pub outputs: Vec<TagId>,
    pub window: Duration,
    pub tolerance: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollinearStep {
    pub tags: Vec<TagId>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_vif")]
    pub vif: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopModeStep {
    pub mode_tag: TagId,
    /// Raw mode value (as text, e.g. `"1"`) to loop state.
    pub map: BTreeMap<String, LoopMode>,
    /// Plant-wide mode tag; the loop counts as closed only where both are.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_mode_tag: Option<TagId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_map: Option<BTreeMap<String, LoopMode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mv: Option<TagId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<TagId>,
    #[serde(default = "default_sign")]
    pub expected_sign: Sign,
    #[serde(default)]
    pub differenced: bool,
    #[serde(default = "default_min_pairs")]
    pub min_pairs: usize,
}

fn default_sign() -> Sign {
    Sign::Positive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramStep {
    pub tag: TagId,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepConfig {
    Clock(ClockStep),
    Grid(GridStep),
    Compression(CompressionStep),
    Outliers(OutlierStep),
    Modes(ModesStep),
    Shutdown(ShutdownStep),
    Static(StaticStep),
    Steady(SteadyStep),
    Delay(DelayStep),
    Lab(LabStep),
    Balance(BalanceStep),
    Collinear(CollinearStep),
    LoopMode(LoopModeStep),
    Histogram(HistogramStep),
}

impl StepConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StepConfig::Clock(_) => "clock",
            StepConfig::Grid(_) => "grid",
            StepConfig::Compression(_) => "compression",
            StepConfig::Outliers(_) => "outliers",
            StepConfig::Modes(_) => "modes",
            StepConfig::Shutdown(_) => "shutdown",
            StepConfig::Static(_) => "static",
            StepConfig::Steady(_) => "steady",
            StepConfig::Delay(_) => "delay",
            StepConfig::Lab(_) => "lab",
            StepConfig::Balance(_) => "balance",
            StepConfig::Collinear(_) => "collinear",
            StepConfig::LoopMode(_) => "loop_mode",
            StepConfig::Histogram(_) => "histogram",
        }
    }

    /// Tags the step reads, for the existence check after ingest.
    pub fn referenced_tags(&self) -> Vec<&TagId> {
        match self {
            StepConfig::Clock(s) => vec![&s.reference, &s.target],
            StepConfig::Grid(s) => s.tags.iter().collect(),
            StepConfig::Compression(s) => s.tags.iter().collect(),
            StepConfig::Outliers(s) => s.tags.iter().collect(),
            StepConfig::Modes(s) => vec![&s.tag],
            StepConfig::Shutdown(s) => vec![&s.tag],
            StepConfig::Static(s) => s.tags.iter().collect(),
            StepConfig::Steady(s) => s.tags.iter().collect(),
            StepConfig::Delay(s) => vec![&s.input, &s.output],
            StepConfig::Lab(s) => {
                let mut v = vec![&s.indicator, &s.result];
                v.extend(&s.acceptance);
                v.extend(&s.prediction);
                v
            }
            StepConfig::Balance(s) => s.inputs.iter().chain(&s.outputs).collect(),
            StepConfig::Collinear(s) => s.tags.iter().collect(),
            StepConfig::LoopMode(s) => {
                let mut v = vec![&s.mode_tag];
                v.extend(&s.global_mode_tag);
                v.extend(&s.mv);
                v.extend(&s.cv);
                v
            }
            StepConfig::Histogram(s) => vec![&s.tag],
        }
    }

    fn needs_grid(&self) -> bool {
        !matches!(
            self,
            StepConfig::Clock(_) | StepConfig::Grid(_) | StepConfig::Compression(_) | StepConfig::Lab(_)
        ) || matches!(self, StepConfig::Lab(l) if l.prediction.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset_id: String,
    /// Relative paths resolve against the config file's directory.
    pub output_dir: PathBuf,
    /// Seed for every randomized step (r_crit calibration).
    #[serde(default)]
    pub seed: u64,
    /// Also write the ingested, clock-corrected raw data as `raw.csv`.
    #[serde(default)]
    pub write_raw: bool,
    #[serde(default)]
    pub inputs: Vec<InputSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tag_meta: Vec<TagMetaOverride>,
    #[serde(default, skip_serializing_if = "SeverityPolicy::is_empty")]
    pub severity: SeverityPolicy,
    #[serde(default)]
    pub steps: Vec<StepConfig>,
}

impl PipelineConfig {
    pub fn new(dataset_id: impl Into<String>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset_id: dataset_id.into(),
            output_dir: output_dir.into(),
            seed: 0,
            write_raw: false,
            inputs: Vec::new(),
            tag_meta: Vec::new(),
            severity: SeverityPolicy::default(),
            steps: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config is serializable")
    }

    /// Structural checks that need no data.
    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, s: &StepConfig, m: String| {
            Err(Error::Config(format!("steps[{i}] ({}): {m}", s.name())))
        };
        if self.dataset_id.trim().is_empty() {
            return Err(Error::Config("dataset_id must not be empty".into()));
        }
        let mut sources = std::collections::BTreeSet::new();
        for (i, inp) in self.inputs.iter().enumerate() {
            if !(0.0..=1.0).contains(&inp.max_error_rate) {
                return Err(Error::Config(format!("inputs[{i}]: max_error_rate must lie in [0, 1]")));
            }
            if !sources.insert((&inp.path, &inp.source)) {
                return Err(Error::Config(format!("inputs[{i}]: duplicate input {}", inp.path.display())));
            }
        }
        let mut gridded = false;
        for (i, s) in self.steps.iter().enumerate() {
            if s.needs_grid() && !gridded {
                return bad(i, s, "needs a preceding grid step".into());
            }
            match s {
                StepConfig::Grid(g) => {
                    if gridded {
                        return bad(i, s, "only one grid step is allowed".into());
                    }
                    if !g.interval.is_positive() {
                        return bad(i, s, "interval must be positive".into());
                    }
                    gridded = true;
                }
                StepConfig::Clock(_) | StepConfig::Compression(_) if gridded => {
                    return bad(i, s, "works on raw data and must precede the grid step".into());
                }
                StepConfig::Steady(st) if st.r_crit == RCrit::Auto && !(st.alpha > 0.0 && st.alpha < 1.0) => {
                    return bad(i, s, format!("alpha={} must lie in (0, 1)", st.alpha));
                }
                StepConfig::Steady(st) if st.presmooth.is_some_and(|w| !(w > 0.0 && w <= 1.0)) => {
                    return bad(i, s, "presmooth must lie in (0, 1]".into());
                }
                StepConfig::Balance(b) if b.inputs.is_empty() || b.outputs.is_empty() => {
                    return bad(i, s, "needs at least one input and one output".into());
                }
                StepConfig::Balance(b) if !file_safe(&b.name) => {
                    return bad(i, s, format!("name {:?} must be alphanumeric, '-', '_' or '.'", b.name));
                }
                StepConfig::Collinear(c) if c.tags.len() < 2 => {
                    return bad(i, s, "needs at least two tags".into());
                }
                StepConfig::Histogram(h) if h.bins == 0 => {
                    return bad(i, s, "bins must be positive".into());
                }
                StepConfig::LoopMode(l) => {
                    for (k, _) in l.map.iter().chain(l.global_map.iter().flatten()) {
                        if k.trim().parse::<i64>().is_err() {
                            return bad(i, s, format!("mode map key {k:?} is not an integer code"));
                        }
                    }
                    if l.mv.is_some() != l.cv.is_some() {
                        return bad(i, s, "mv and cv must be given together".into());
                    }
                    if l.global_mode_tag.is_some() != l.global_map.is_some() {
                        return bad(i, s, "global_mode_tag and global_map must be given together".into());
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

pub(crate) fn file_safe(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl SeverityPolicy {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
