// SPDX-License-Identifier: MIT OR Apache-2.0

//! Input/output delay alignment and lab result reconciliation.

mod bias;
mod delay;
mod lab;

pub use bias::{
    bias_track, compute_residuals, correct_prediction, correct_series, residuals_at, update_bias,
    write_lab_audit_csv, BiasState, Residual, Residuals, DEFAULT_BIAS_ALPHA,
};
pub use delay::{apply_shift, estimate_delay, DelayEstimate, DelayOptions};
pub use lab::{parse_lab_events, LabParse, LabParseOptions, OpenCycle, OpenReason};
