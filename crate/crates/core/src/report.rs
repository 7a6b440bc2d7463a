//! Run artifacts on disk.
//!
//! A run directory holds one `scenario_NN/` folder per scenario, a matrix
//! summary and a status file:
//!
//! ```text
//! run_dir/
//!   run_status.json
//!   matrix_summary.csv
//!   weekly_scores.csv          (written by `merge_weekly`)
//!   scenario_01/
//!     scenario.json
//!     monitoring.csv
//!     retraining_events.csv
//!     splits/split_000.json    (research split, then one per retraining)
//!   scenario_02/
//!     error.txt                (only for a failed scenario)
//! ```
//!
//! Every CSV is RFC 4180 with a header row. Floats are written in their
//! shortest round-trip form, so values read back compare exactly.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitor::MonitorRecord;
use crate::orchestrator::{AccessAudit, RunReport, ScenarioConfig, TriggerReason};
use crate::trainer::TrainingBudget;

pub const STATUS_FILE: &str = "run_status.json";
pub const SUMMARY_FILE: &str = "matrix_summary.csv";
pub const WEEKLY_FILE: &str = "weekly_scores.csv";
pub const MONITORING_FILE: &str = "monitoring.csv";
pub const EVENTS_FILE: &str = "retraining_events.csv";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const ERROR_FILE: &str = "error.txt";

/// Nominal throughput used by [`TimingMode::Work`].
pub const WORK_EXAMPLES_PER_SECOND: f64 = 1_000_000.0;

/// How training durations are written to run artifacts.
///
/// `Work` reports `examples_seen / WORK_EXAMPLES_PER_SECOND`, which depends
/// only on the inputs and seed, so reruns produce byte-identical files.
/// `Measured` reports wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    #[default]
    Work,
    Measured,
}

impl TimingMode {
    pub fn seconds(self, budget: &TrainingBudget) -> f64 {
        match self {
            TimingMode::Work => budget.examples_seen as f64 / WORK_EXAMPLES_PER_SECOND,
            TimingMode::Measured => budget.seconds(),
        }
    }
}

pub fn scenario_dir(run_dir: &Path, number: u32) -> PathBuf {
    run_dir.join(format!("scenario_{number:02}"))
}

/// One row of `matrix_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario_no: u32,
    pub data_split: String,
    pub finetuning: String,
    pub inclusion: String,
    pub schedule: String,
    pub retraining_time_s: f64,
    pub retraining_count: usize,
    pub avg_monitoring_performance: f64,
}

impl SummaryRow {
    pub fn new(report: &RunReport, timing: TimingMode) -> Self {
        let s = &report.scenario;
        SummaryRow {
            scenario_no: s.number,
            data_split: s.split_strategy.as_str().into(),
            finetuning: s.finetune_mode.as_str().into(),
            inclusion: s.inclusion.as_str().into(),
            schedule: s.schedule.as_str().into(),
            retraining_time_s: report.retraining_events.iter().map(|e| timing.seconds(&e.budget)).sum(),
            retraining_count: report.retraining_count,
            avg_monitoring_performance: report.avg_monitoring_performance,
        }
    }
}

/// One row of `retraining_events.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub trigger_date: NaiveDate,
    pub trigger_reason: TriggerReason,
    pub executed: bool,
    pub skip_reason: Option<String>,
    pub new_documents: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub challenger_score: Option<f64>,
    pub champion_score: Option<f64>,
    pub promoted: bool,
    pub retraining_time_s: f64,
    pub epochs_run: usize,
    pub examples_seen: usize,
}

/// One row of `weekly_scores.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklyRow {
    pub scenario_no: u32,
    pub week_end: NaiveDate,
    pub score: Option<f64>,
}

/// Contents of `scenario.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: ScenarioConfig,
    pub research_test_score: f64,
    pub champion_time_s: f64,
    pub avg_monitoring_performance: f64,
    pub retraining_count: usize,
    pub audit: AccessAudit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusEntry {
    pub scenario_no: u32,
    pub status: ScenarioStatus,
    pub error: Option<String>,
}

/// Contents of `run_status.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStatus {
    pub timing: TimingMode,
    pub scenarios: Vec<StatusEntry>,
}

impl RunStatus {
    pub fn failures(&self) -> impl Iterator<Item = &StatusEntry> {
        self.scenarios.iter().filter(|s| s.status == ScenarioStatus::Failed)
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(STATUS_FILE);
        if !path.is_file() {
            return Err(Error::MissingArtifact(path));
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    // write the header explicitly so an empty table still has one
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const SUMMARY_HEADER: [&str; 8] = [
    "scenario_no",
    "data_split",
    "finetuning",
    "inclusion",
    "schedule",
    "retraining_time_s",
    "retraining_count",
    "avg_monitoring_performance",
];
const MONITORING_HEADER: [&str; 7] =
    ["week_end", "window_size", "window_score", "threshold", "breached", "streak", "decision"];
const EVENTS_HEADER: [&str; 14] = [
    "trigger_date",
    "trigger_reason",
    "executed",
    "skip_reason",
    "new_documents",
    "train_size",
    "validation_size",
    "test_size",
    "challenger_score",
    "champion_score",
    "promoted",
    "retraining_time_s",
    "epochs_run",
    "examples_seen",
];
const WEEKLY_HEADER: [&str; 3] = ["scenario_no", "week_end", "score"];

/// Writes the per-scenario folder for a completed scenario.
pub fn write_scenario(run_dir: &Path, report: &RunReport, timing: TimingMode) -> Result<()> {
    let dir = scenario_dir(run_dir, report.scenario.number);
    let splits = dir.join("splits");
    create_dir(&splits)?;
    let summary = ScenarioSummary {
        scenario: report.scenario.clone(),
        research_test_score: report.research_test_score,
        champion_time_s: timing.seconds(&report.champion_budget),
        avg_monitoring_performance: report.avg_monitoring_performance,
        retraining_count: report.retraining_count,
        audit: report.audit,
    };
    write_text(&dir.join(SCENARIO_FILE), &serde_json::to_string_pretty(&summary)?)?;
    write_csv(&dir.join(MONITORING_FILE), &report.weekly, &MONITORING_HEADER)?;
    let events = report.retraining_events.iter().map(|e| EventRow {
        trigger_date: e.trigger_date,
        trigger_reason: e.trigger_reason,
        executed: e.executed,
        skip_reason: e.skip_reason.clone(),
        new_documents: e.new_documents,
        train_size: e.train_size,
        validation_size: e.validation_size,
        test_size: e.test_size,
        challenger_score: e.challenger_score,
        champion_score: e.champion_score,
        promoted: e.promoted,
        retraining_time_s: timing.seconds(&e.budget),
        epochs_run: e.budget.epochs_run,
        examples_seen: e.budget.examples_seen,
    });
    write_csv(&dir.join(EVENTS_FILE), events, &EVENTS_HEADER)?;
    for (k, split) in report.splits.iter().enumerate() {
        write_text(&splits.join(format!("split_{k:03}.json")), &split.to_manifest_json())?;
    }
    Ok(())
}

/// Writes every scenario folder, the matrix summary and the status file.
/// Failed scenarios get an `error.txt` and are left out of the summary.
pub fn write_run(
    run_dir: &Path,
    results: &[(ScenarioConfig, Result<RunReport>)],
    timing: TimingMode,
) -> Result<RunStatus> {
    create_dir(run_dir)?;
    let mut status = RunStatus { timing, scenarios: Vec::new() };
    let mut summary = Vec::new();
    for (cfg, result) in results {
        match result {
            Ok(report) => {
                write_scenario(run_dir, report, timing)?;
                summary.push(SummaryRow::new(report, timing));
                status.scenarios.push(StatusEntry { scenario_no: cfg.number, status: ScenarioStatus::Ok, error: None });
            }
            Err(e) => {
                let dir = scenario_dir(run_dir, cfg.number);
                create_dir(&dir)?;
                write_text(&dir.join(ERROR_FILE), &format!("{e}\n"))?;
                status.scenarios.push(StatusEntry {
                    scenario_no: cfg.number,
                    status: ScenarioStatus::Failed,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    write_csv(&run_dir.join(SUMMARY_FILE), &summary, &SUMMARY_HEADER)?;
    write_text(&run_dir.join(STATUS_FILE), &serde_json::to_string_pretty(&status)?)?;
    Ok(status)
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_csv(path)
}

pub fn read_monitoring(path: &Path) -> Result<Vec<MonitorRecord>> {
    read_csv(path)
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>> {
    read_csv(path)
}

pub fn read_weekly(path: &Path) -> Result<Vec<WeeklyRow>> {
    read_csv(path)
}

/// Outcome of [`merge_weekly`].
#[derive(Debug, Clone, PartialEq)]
pub struct WeeklyMerge {
    pub path: PathBuf,
    pub rows: usize,
    pub scenarios: Vec<u32>,
    /// Failed scenarios, with their error, left out of the merged file.
    pub failed: Vec<(u32, String)>,
}

/// Merges every successful scenario's weekly scores into one long-format
/// CSV (`scenario_no, week_end, score`) in the run directory. Weeks with an
/// empty window keep an empty `score` so all series share one week grid.
pub fn merge_weekly(run_dir: &Path) -> Result<WeeklyMerge> {
    let status = RunStatus::load(run_dir)?;
    let mut rows = Vec::new();
    let mut scenarios = Vec::new();
    let mut failed = Vec::new();
    for entry in &status.scenarios {
        match entry.status {
            ScenarioStatus::Ok => {
                let monitoring = read_monitoring(&scenario_dir(run_dir, entry.scenario_no).join(MONITORING_FILE))?;
                rows.extend(monitoring.into_iter().map(|r| WeeklyRow {
                    scenario_no: entry.scenario_no,
                    week_end: r.week_end,
                    score: r.window_score,
                }));
                scenarios.push(entry.scenario_no);
            }
            ScenarioStatus::Failed => {
                failed.push((entry.scenario_no, entry.error.clone().unwrap_or_default()));
            }
        }
    }
    let path = run_dir.join(WEEKLY_FILE);
    write_csv(&path, &rows, &WEEKLY_HEADER)?;
    Ok(WeeklyMerge { path, rows: rows.len(), scenarios, failed })
}
