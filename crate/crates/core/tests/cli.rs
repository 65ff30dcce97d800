// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use histprep::pipeline::{PipelineConfig, RCrit, StepConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_histprep"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn histprep")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_exits_zero_and_lists_subcommands() {
    let o = bin().arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for sub in ["ingest", "grid", "clean", "steady", "align", "lab", "diagnose", "report", "synth", "run"] {
        assert!(text.contains(sub), "missing {sub} in help:\n{text}");
    }
}

#[test]
fn unknown_flag_exits_one() {
    let o = bin().args(["grid", "--no-such-flag"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["run", "--config", "absent.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lab_on_two_event_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = format!("lims={}", fixture("two_event_lab.csv").display());
    let o = run_in(
        dir.path(),
        &[
            "lab", "--input", &input, "--indicator", "Q.I", "--result", "Q.Y", "--acceptance", "Q.A",
            "--accept-window", "10min", "--out", "o",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let audit = std::fs::read_to_string(dir.path().join("o/lab_Q.Y.csv")).unwrap();
    let rows: Vec<&str> = audit.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("2024-03-01T00:10:00.000000Z,2024-03-01T01:10:00.000000Z,12,false"));
    assert!(rows[1].starts_with("2024-03-01T02:10:00.000000Z,2024-03-01T03:10:00.000000Z,12.4,true"));
    let report = std::fs::read_to_string(dir.path().join("o/report.json")).unwrap();
    assert!(report.contains("2 events, 1 accepted"));
}

#[test]
fn steady_flags_lower_to_config() {
    let o = bin()
        .args([
            "steady", "--input", "dcs=plant.csv", "--interval", "10s", "--tag", "FI100", "--r-crit", "auto",
            "--alpha", "0.01", "--seed", "7", "--print-config",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let cfg = PipelineConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.inputs[0].source, "dcs");
    match &cfg.steps[..] {
        [StepConfig::Grid(g), StepConfig::Steady(s)] => {
            assert_eq!(g.interval.as_secs_f64(), 10.0);
            assert_eq!(s.r_crit, RCrit::Auto);
            assert_eq!(s.alpha, 0.01);
            assert_eq!(s.tags[0].as_str(), "FI100");
        }
        other => panic!("unexpected steps {other:?}"),
    }
}

#[test]
fn flag_run_matches_config_run() {
    let dir = tempfile::tempdir().unwrap();
    let input = format!("lims={}", fixture("two_event_lab.csv").display());
    let base = [
        "lab", "--input", &input, "--indicator", "Q.I", "--result", "Q.Y", "--acceptance", "Q.A",
        "--accept-window", "10min",
    ];
    let printed = run_in(dir.path(), &[&base[..], &["--out", "cfg", "--print-config"]].concat());
    std::fs::write(dir.path().join("lab.toml"), printed.stdout).unwrap();
    assert_eq!(run_in(dir.path(), &["run", "--config", "lab.toml"]).status.code(), Some(0));
    assert_eq!(run_in(dir.path(), &[&base[..], &["--out", "flags"]].concat()).status.code(), Some(0));
    for f in ["lab_Q.Y.csv", "report.json", "segments.csv"] {
        let a = std::fs::read(dir.path().join("cfg").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("flags").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn synth_then_run_without_defects_has_no_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario: toml::Table =
        toml::from_str(include_str!("../scenarios/full.toml")).unwrap();
    scenario.remove("defects");
    scenario.insert("steps".into(), 4000.into());
    scenario.insert("feed".into(), {
        let mut feed = scenario["feed"].as_table().unwrap().clone();
        feed.insert("plan".into(), toml::Value::try_from(vec![(100.0, 2000), (120.0, 2000)]).unwrap());
        feed.into()
    });
    scenario.insert("quality".into(), {
        let mut q = scenario["quality"].as_table().unwrap().clone();
        q.insert("samples".into(), 2.into());
        q.into()
    });
    scenario.insert("loop".into(), {
        let mut l = scenario["loop"].as_table().unwrap().clone();
        l.insert("open_steps".into(), 1500.into());
        l.into()
    });
    std::fs::write(dir.path().join("s.toml"), toml::to_string(&scenario).unwrap()).unwrap();
    let o = run_in(dir.path(), &["synth", "--scenario", "s.toml", "--out", "gen"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_in(dir.path(), &["run", "--config", "gen/pipeline.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("findings: 0 error"));

    let report = dir.path().join("gen/out/report.json");
    let o = run_in(dir.path(), &["report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("dataset scenario-"));
}
