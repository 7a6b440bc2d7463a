//! Run all twelve strategy-matrix rows in parallel and write the run
//! artifacts (summary, monitoring logs, retraining events, split manifests).
//!
//! ```bash
//! cargo run --release --example strategy_matrix -- /tmp/ctsim_run
//! ```

use std::path::PathBuf;

use chrono::NaiveDate;
use ctsim::corpus::FeatureDim;
use ctsim::orchestrator::{RunSettings, ScenarioConfig, Simulator};
use ctsim::report::{merge_weekly, read_summary, write_run, TimingMode, SUMMARY_FILE};
use ctsim::synth::{generate, DriftEvent, DriftKind, DriftSpec};
use ctsim::trainer::{LinearLearner, TrainOptions};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("ctsim_matrix"), PathBuf::from);

    let spec = DriftSpec::stationary(12, 60, date("2015-01-01"), date("2021-01-01"), 42).with_event(DriftEvent {
        date: date("2019-04-01"),
        kind: DriftKind::VocabularyShift,
        magnitude: 0.5,
        labels: None,
    });
    let corpus = generate(&spec)?.corpus;
    let dim = FeatureDim::default();
    let encoded = corpus.encode(dim);
    let learner = LinearLearner::new(corpus.label_space().len(), dim, TrainOptions::default());
    let sim = Simulator::new(&corpus, &encoded, &learner)?;

    let scenarios = ScenarioConfig::table(&RunSettings::new(date("2019-01-01"), date("2021-01-01"), 7));
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results = sim.run_matrix(&scenarios, workers);
    let status = write_run(&out, &results, TimingMode::Work)?;
    let merged = merge_weekly(&out)?;

    println!("{:>3} {:>13} {:>11} {:>16} {:>14} {:>9} {:>7} {:>8}", "no", "split", "finetuning", "inclusion", "schedule", "work (s)", "retrain", "avg F1");
    for row in read_summary(&out.join(SUMMARY_FILE))? {
        println!(
            "{:>3} {:>13} {:>11} {:>16} {:>14} {:>9.3} {:>7} {:>8.4}",
            row.scenario_no,
            row.data_split,
            row.finetuning,
            row.inclusion,
            row.schedule,
            row.retraining_time_s,
            row.retraining_count,
            row.avg_monitoring_performance
        );
    }
    println!("{} failed scenario(s); {} weekly rows in {}", status.failures().count(), merged.rows, merged.path.display());
    Ok(())
}
