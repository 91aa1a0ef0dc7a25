//! Harness and CLI contract: config validation and exit codes, seeded determinism of emitted
//! reports, and the cross-run aggregate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use osr_core::harness::{aggregate, read_reports, run, RunOptions, RunStatus, RunSummary, Scenario, AGGREGATE_SCHEMA};
use osr_core::report::EstimateReport;
use osr_core::resolvent::InequalityId;
use osr_core::Error;
use serde_json::json;

fn tmp(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("harness").join(name);
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn osr(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_osr")).args(args).output().unwrap();
    let text = format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    (out.status.code().unwrap_or(-1), text)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn write_reports(dir: &Path, name: &str, reports: &[EstimateReport]) -> PathBuf {
    let mut text = String::new();
    for r in reports {
        text.push_str(&serde_json::to_string(r).unwrap());
        text.push('\n');
    }
    PathBuf::from(write(dir, name, &text))
}

#[test]
fn missing_kind_is_a_config_error() {
    let d = tmp("missing-kind");
    let cfg = write(&d, "bad.toml", "schema = \"osr-scenario/1\"\nprofile = \"exp\"\n");
    assert!(matches!(Scenario::parse(&fs::read_to_string(&cfg).unwrap(), &d), Err(Error::Config(_))));
    let (code, text) = osr(&["check-profile", "--config", &cfg]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("kind"), "{text}");
}

#[test]
fn unknown_fields_and_bad_values_are_rejected_with_their_names() {
    let d = tmp("unknown-field");
    let text = "kind = \"profile-check\"\nprofile = \"exp\"\n[params]\nexpected_mm = 2.0\n";
    match Scenario::parse(text, &d) {
        Err(Error::Config(msg)) => assert!(msg.contains("expected_mm"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let text = "kind = \"profile-check\"\nprofile = \"exp\"\n[numerics]\nn_nodes = 4\n";
    match Scenario::parse(text, &d) {
        Err(Error::Config(msg)) => assert!(msg.contains("n_nodes"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let text = "schema = \"osr-scenario/0\"\nkind = \"profile-check\"\nprofile = \"exp\"\n";
    assert!(Scenario::parse(text, &d).is_err());
}

#[test]
fn verb_must_match_the_scenario_kind() {
    let d = tmp("verb-mismatch");
    let cfg = write(&d, "p.toml", "kind = \"profile-check\"\nprofile = \"exp\"\n");
    let (code, text) = osr(&["sweep", "--config", &cfg]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn profile_check_on_exp_reports_m_two() {
    let d = tmp("profile-exp");
    let cfg = write(
        &d,
        "p.toml",
        "kind = \"profile-check\"\nprofile = \"exp\"\n[params]\nexpect_pass = true\nexpected_m = 2.0\nm_tolerance = 0.01\n",
    );
    let out = d.join("out");
    let (code, text) = osr(&["check-profile", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    let s: RunSummary = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.status, RunStatus::Pass);
    let m = s.data["minimal_m"].as_f64().unwrap_or(f64::NAN);
    assert!((m - 2.0).abs() < 0.02, "{}", s.data);
}

#[test]
fn failing_checks_exit_one() {
    let d = tmp("profile-tanh");
    // tanh is not strongly concave, so expecting a pass must fail the run
    let cfg = write(&d, "p.toml", "kind = \"profile-check\"\nprofile = \"tanh\"\n[params]\nexpect_pass = true\n");
    let (code, text) = osr(&["check-profile", "--config", &cfg, "--out", d.join("out").to_str().unwrap()]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL"), "{text}");
}

#[test]
fn seeded_sweep_is_byte_identical() {
    let d = tmp("determinism");
    let id = InequalityId::ALL[0].as_str();
    let text = format!(
        "kind = \"resolvent-sweep\"\nprofile = \"exp\"\nseed = 3\n[params]\nids = [\"{id}\"]\nresolutions = [32]\ndraws = 2\nmin_points = 1\n"
    );
    let sc = Scenario::parse(&text, &d).unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = d.join(format!("run{k}"));
        run(&sc, &RunOptions { out: Some(out.clone()), ..RunOptions::default() }).unwrap();
        bytes.push(fs::read(out.join("reports.jsonl")).unwrap());
    }
    assert!(!bytes[0].is_empty());
    assert_eq!(bytes[0], bytes[1]);
    // a different seed draws different data
    let out = d.join("other");
    run(&sc, &RunOptions { out: Some(out.clone()), seed: Some(4), ..RunOptions::default() }).unwrap();
    assert_ne!(fs::read(out.join("reports.jsonl")).unwrap(), bytes[0]);
}

#[test]
fn aggregate_of_nothing_is_empty() {
    let d = tmp("aggregate-empty");
    let s = aggregate(&[], Some(&d)).unwrap();
    assert_eq!(s.schema, AGGREGATE_SCHEMA);
    assert!(s.rows.is_empty());
    assert!(d.join("aggregate.json").exists());
    let (code, _) = osr(&["aggregate", "--out", d.to_str().unwrap()]);
    assert_eq!(code, 0);
}

#[test]
fn aggregate_of_one_report_is_that_report() {
    let d = tmp("aggregate-one");
    let r = EstimateReport::new("GMMray1", 3.0, 2.0, json!({ "n": 5 }), 64);
    let p = write_reports(&d, "r.jsonl", &[r.clone()]);
    let s = aggregate(&[p], None).unwrap();
    assert_eq!(s.rows.len(), 1);
    let row = &s.rows[0];
    assert_eq!((row.inequality_id.as_str(), row.count, row.sup_ratio), ("GMMray1", 1, 1.5));
    assert_eq!(row.argmax.as_ref(), Some(&r));
    assert!(row.drift_percent.is_empty());
}

#[test]
fn aggregate_of_n_and_2n_runs_gives_a_drift_row() {
    let d = tmp("aggregate-trend");
    let coarse = [
        EstimateReport::new("GMMray1", 1.0, 1.0, json!({ "k": 0 }), 64),
        EstimateReport::new("GMMray1", 0.9, 1.0, json!({ "k": 1 }), 64),
    ];
    let fine = [
        EstimateReport::new("GMMray1", 1.05, 1.0, json!({ "k": 0 }), 128),
        EstimateReport::new("GMMray1", 0.95, 1.0, json!({ "k": 1 }), 128),
    ];
    let a = write_reports(&d, "a.jsonl", &coarse);
    let b = write_reports(&d, "b.jsonl", &fine);
    let s = aggregate(&[a, b], Some(&d)).unwrap();
    let row = &s.rows[0];
    assert_eq!(row.count, 4);
    assert_eq!(row.by_resolution.len(), 2);
    assert!((row.sup_ratio - 1.05).abs() < 1e-15);
    // |1.05 − 1.0| / 1.05
    assert!((row.drift_percent[0] - 100.0 * 0.05 / 1.05).abs() < 1e-9);
    let trend = fs::read_to_string(d.join("trend.csv")).unwrap();
    assert_eq!(trend.lines().count(), 3);
}

#[test]
fn schema_mismatch_is_refused() {
    let d = tmp("aggregate-schema");
    let mut v = serde_json::to_value(EstimateReport::new("GMMray1", 1.0, 1.0, json!({}), 64)).unwrap();
    v["schema"] = json!("osr-report/0");
    let p = PathBuf::from(write(&d, "old.jsonl", &format!("{v}\n")));
    assert!(matches!(read_reports(&p), Err(Error::Schema { .. })));
    let (code, text) = osr(&["aggregate", p.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
}

#[test]
fn infinite_ratios_survive_the_round_trip_as_the_largest_float() {
    let d = tmp("aggregate-inf");
    let r = EstimateReport::new("GMMray1", 1.0, 0.0, json!({}), 64);
    let p = write_reports(&d, "inf.jsonl", &[r]);
    let back = read_reports(&p).unwrap();
    assert_eq!(back[0].ratio, f64::MAX);
}
