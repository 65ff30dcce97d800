// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::BTreeSet;
use std::path::Path;

use histprep::diagnostics::{FindingKind, Severity};
use histprep::pipeline::{
    exit_code, run_config, run_pipeline, InputSpec, PipelineConfig, EXIT_FAILURE, EXIT_FINDINGS, EXIT_OK,
};
use histprep::synth::{generate_scenario, write_scenario, ScenarioConfig};
use serde_json::Value;

fn fixture_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures"))
}

#[test]
fn zero_steps_ingests_and_reports() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::new("lab-only", out.path());
    cfg.inputs.push(InputSpec::new("two_event_lab.csv", "lims"));
    let o = run_config(&cfg, fixture_dir()).unwrap();
    assert_eq!(o.exit_code, EXIT_OK);
    assert!(o.report.findings.is_empty());
    assert_eq!(o.report.tags.len(), 3);
    assert!(out.path().join("report.json").is_file());
}

#[test]
fn unknown_tag_fails_with_step_index() {
    let text = r#"
dataset_id = "x"
output_dir = "out"

[[inputs]]
path = "two_event_lab.csv"
source = "lims"

[[steps]]
kind = "grid"
interval = "1min"

[[steps]]
kind = "outliers"
tags = ["NOPE"]
"#;
    let cfg = PipelineConfig::from_toml(text).unwrap();
    let r = run_config(&cfg, fixture_dir());
    assert_eq!(exit_code(&r), EXIT_FAILURE);
    let msg = r.unwrap_err().to_string();
    assert!(msg.contains("steps[1]") && msg.contains("NOPE"), "{msg}");
}

fn scenario_run(dir: &Path, severity: &[(&str, &str)]) -> (i32, Value, ScenarioConfig) {
    let cfg = ScenarioConfig::from_toml(include_str!("../scenarios/full.toml")).unwrap();
    let s = generate_scenario(&cfg).unwrap();
    write_scenario(&s, dir).unwrap();
    let mut p = histprep::pipeline::scenario_pipeline(&cfg, &s.dataset, "out");
    for (k, v) in severity {
        let kind: FindingKind = serde_json::from_value(Value::String(k.to_string())).unwrap();
        let level: Severity = serde_json::from_value(Value::String(v.to_string())).unwrap();
        p.severity.0.insert(kind, level);
    }
    std::fs::write(dir.join("pipeline.toml"), p.to_toml()).unwrap();
    let o = run_pipeline(&dir.join("pipeline.toml")).unwrap();
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap();
    (o.exit_code, report, cfg)
}

fn has(report: &Value, kind: &str, tag: &str) -> bool {
    report["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["kind"] == kind && f["tags"].as_array().unwrap().iter().any(|t| t == tag))
}

#[test]
fn full_scenario_surfaces_every_injected_defect() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report, cfg) = scenario_run(dir.path(), &[]);
    assert_eq!(code, EXIT_OK);
    let kinds: BTreeSet<String> = cfg.defects.iter().map(|d| d.kind.name().to_string()).collect();
    assert_eq!(kinds.len(), 5);

    // swinging_door_compression
    assert!(has(&report, "compression_suspected", "LI600"));
    // stuck_sensor
    assert!(has(&report, "static_tag", "PI500"));
    // miscalibration
    assert!(has(&report, "balance_gap", "FI200"));
    // spike
    let outliers = std::fs::read_to_string(dir.path().join("out/outliers.csv")).unwrap();
    for t in ["03:00:00", "08:00:00", "20:00:00"] {
        assert!(outliers.contains(&format!("PI500,2024-01-01T{t}.000000Z")), "spike at {t} missed");
    }
    // clock_skew: 90 s within one 5 s step
    let clock = std::fs::read_to_string(dir.path().join("out/clock.csv")).unwrap();
    let offset: f64 = clock.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((offset - 90.0).abs() <= 5.0, "clock offset {offset}");

    // the closed loop is visible too
    assert!(has(&report, "sign_flip", "FIC400.OP"));
}

#[test]
fn severity_policy_escalates_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report, _) = scenario_run(dir.path(), &[("balance_gap", "error")]);
    assert_eq!(code, EXIT_FINDINGS);
    assert!(report["findings"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f["kind"] == "balance_gap" && f["severity"] == "error"));
}
