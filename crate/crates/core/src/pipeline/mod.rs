// SPDX-License-Identifier: MIT OR Apache-2.0

//! Config-driven runs: ingest, then an ordered list of steps, then one
//! report plus CSV artifacts.

mod config;
mod run;
mod scenario;

pub use config::{
    BalanceStep, ClockStep, CollinearStep, CompressionStep, DelayStep, GridStep, HistogramStep,
    InputFormat, InputSpec, LabStep, LoopModeStep, ModesStep, OutlierStep, PipelineConfig, RCrit,
    ShutdownStep, StaticStep, SteadyStep, StepConfig, TagMetaOverride,
};
pub use run::{
    exit_code, run_config, run_pipeline, PipelineOutcome, EXIT_FAILURE, EXIT_FINDINGS, EXIT_OK,
};
pub use scenario::scenario_pipeline;
