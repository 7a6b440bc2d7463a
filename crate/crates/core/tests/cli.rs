use std::fs;
use std::path::Path;
use std::process::Command;

use ctsim::cli::{self, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE};
use ctsim::orchestrator::{average_score, RunSettings, ScenarioConfig};
use ctsim::report::{self, TimingMode};

const SPEC: &str = r#"
seed = 5
n_labels = 6
docs_per_week = 30
start = "2016-01-01"
end = "2021-01-01"

[[drift_events]]
date = "2019-04-01"
kind = "vocabulary_shift"
magnitude = 0.5
"#;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("ctsim").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run_config(scenarios: &str) -> String {
    format!(
        "drift_spec = \"spec.toml\"\nseed = 11\nresearch_cutoff = \"2019-01-01\"\nmonitoring_end = \"2021-01-01\"\nscenarios = {scenarios}\nfeature_dim = 4096\n"
    )
}

#[test]
fn generate_writes_corpus_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.toml", SPEC);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let (code, out, _) = run(&["generate", "--spec", &spec, "--out", a.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("wrote 7830 documents"), "{out}");
    assert_eq!(run(&["generate", "--spec", &spec, "--out", b.to_str().unwrap()]).0, EXIT_OK);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 7830);
}

#[test]
fn drift_outside_span_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.toml", &SPEC.replace("2019-04-01", "2023-04-01"));
    let out = dir.path().join("c.jsonl");
    let (code, _, err) = run(&["generate", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("drift event outside corpus span"), "{err}");
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "spec.toml", SPEC);
    let empty = write(dir.path(), "empty.toml", &run_config("[]"));
    let (code, _, err) = run(&["run", "--config", &empty, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("no scenarios selected") && err.contains("usage:"), "{err}");

    let bad_row = write(dir.path(), "bad.toml", &run_config("[14]"));
    assert_eq!(run(&["run", "--config", &bad_row, "--out", "unused"]).0, EXIT_USAGE);
    assert_eq!(run(&["run", "--config", &empty]).0, EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["run"]).0, EXIT_USAGE);
    assert_eq!(run(&["report", "--run-dir", dir.path().join("nothing").to_str().unwrap()]).0, EXIT_USAGE);
}

#[test]
fn run_then_report_round_trips_scores() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "spec.toml", SPEC);
    let config = write(dir.path(), "run.toml", &run_config("[1, 2]"));
    let run_dir = dir.path().join("run");
    let (code, out, err) = run(&["run", "--config", &config, "--out", run_dir.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("scenario  1:") && out.contains("scenario  2:"));

    let summary = report::read_summary(&run_dir.join(report::SUMMARY_FILE)).unwrap();
    assert_eq!(summary.iter().map(|r| r.scenario_no).collect::<Vec<_>>(), [1, 2]);
    assert_eq!(summary[1].retraining_count, 3);
    assert_eq!(summary[1].schedule, "fixed_interval");
    for n in [1, 2] {
        let dir = report::scenario_dir(&run_dir, n);
        assert!(dir.join("splits/split_000.json").is_file());
        assert!(dir.join(report::EVENTS_FILE).is_file());
    }

    let (code, out, _) = run(&["report", "--run-dir", run_dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("for 2 scenario(s)"));
    let weekly = report::read_weekly(&run_dir.join(report::WEEKLY_FILE)).unwrap();
    let series = |n: u32| weekly.iter().filter(|r| r.scenario_no == n).collect::<Vec<_>>();
    let (one, two) = (series(1), series(2));
    assert_eq!(one.len(), two.len());
    assert!(one.iter().zip(&two).all(|(a, b)| a.week_end == b.week_end));
    for (n, rows) in [(1, one), (2, two)] {
        let scores: Vec<f64> = rows.iter().filter_map(|r| r.score).collect();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let expected = summary.iter().find(|r| r.scenario_no == n).unwrap().avg_monitoring_performance;
        assert!((mean - expected).abs() <= 1e-12, "scenario {n}: {mean} vs {expected}");
    }
}

#[test]
fn corpus_file_source_and_config_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.toml", SPEC);
    let corpus = dir.path().join("corpus.jsonl");
    assert_eq!(run(&["generate", "--spec", &spec, "--out", corpus.to_str().unwrap()]).0, EXIT_OK);
    let config = write(
        dir.path(),
        "run.toml",
        &run_config("[7]").replace("drift_spec = \"spec.toml\"", "corpus = \"corpus.jsonl\"\noutput_dir = \"out\""),
    );
    let (code, _, err) = run(&["run", "--config", &config]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(dir.path().join("out").join(report::SUMMARY_FILE).is_file());
}

#[test]
fn failed_scenario_gives_partial_report() {
    // a run directory with one success and one failure, written directly
    let dir = tempfile::tempdir().unwrap();
    let settings = RunSettings::new(common_date("2019-01-01"), common_date("2021-01-01"), 1);
    let spec = ctsim::synth::DriftSpec::from_toml(SPEC).unwrap();
    let corpus = ctsim::synth::generate(&spec).unwrap().corpus;
    let dim = ctsim::corpus::FeatureDim::new(4096).unwrap();
    let encoded = corpus.encode(dim);
    let learner = ctsim::trainer::LinearLearner::new(6, dim, Default::default());
    let sim = ctsim::orchestrator::Simulator::new(&corpus, &encoded, &learner).unwrap();
    let ok = ScenarioConfig::table_row(1, &settings).unwrap();
    let report_one = sim.run_scenario(&ok).unwrap();
    let failed = ScenarioConfig::table_row(2, &settings).unwrap();
    let results = vec![
        (ok, Ok(report_one.clone())),
        (failed, Err(ctsim::Error::InvalidConfig("simulated failure".into()))),
    ];
    let status = report::write_run(dir.path(), &results, TimingMode::Work).unwrap();
    assert_eq!(status.failures().count(), 1);
    assert!(report::scenario_dir(dir.path(), 2).join(report::ERROR_FILE).is_file());

    let (code, out, err) = run(&["report", "--run-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_PARTIAL);
    assert!(err.contains("warning: scenario 2 failed"), "{err}");
    assert!(out.contains("for 1 scenario(s)"));
    let weekly = report::read_weekly(&dir.path().join(report::WEEKLY_FILE)).unwrap();
    assert!(weekly.iter().all(|r| r.scenario_no == 1));
    assert_eq!(weekly.len(), report_one.weekly.len());
    let monitoring =
        report::read_monitoring(&report::scenario_dir(dir.path(), 1).join(report::MONITORING_FILE)).unwrap();
    assert_eq!(average_score(&monitoring), report_one.avg_monitoring_performance);
}

#[test]
fn binary_runs() {
    let exe = env!("CARGO_BIN_EXE_ctsim");
    let help = Command::new(exe).arg("--help").output().unwrap();
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in ["generate", "run", "report"] {
        assert!(text.contains(sub), "{text}");
    }
    let missing = Command::new(exe).args(["report", "--run-dir", "/nonexistent/run"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_USAGE));
}

fn common_date(s: &str) -> chrono::NaiveDate {
    s.parse().unwrap()
}
