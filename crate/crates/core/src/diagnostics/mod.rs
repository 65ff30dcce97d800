// SPDX-License-Identifier: MIT OR Apache-2.0

//! Cross-tag quality checks and the consolidated report.

mod balance;
mod collinear;
mod finding;
mod loopmode;
mod report;

pub use balance::{balance_closure, BalanceParams, BalanceResult, BalanceWindow, WindowStatus};
pub use collinear::{flag_collinear, vif, CollinearParams, MIN_COLLINEAR_ROWS};
pub use finding::{Finding, FindingKind, Severity, SeverityPolicy};
pub use loopmode::{
    closed_loop_sign_check, combine_loop_modes, segment_loop_mode, LoopMode, ModeMap, Sign,
    SignCheck, SignCheckParams,
};
pub use report::{
    build_report, DiagnosticReport, ReportInputs, SegmentTally, TagSummary, REPORT_SCHEMA_VERSION,
};
