//! Run one strategy-matrix row end to end and print its monitoring log and
//! retraining events.
//!
//! ```bash
//! cargo run --release --example run_scenario -- 1
//! ```

use chrono::NaiveDate;
use ctsim::corpus::FeatureDim;
use ctsim::orchestrator::{RunSettings, ScenarioConfig, Simulator};
use ctsim::synth::{generate, DriftEvent, DriftKind, DriftSpec};
use ctsim::trainer::{LinearLearner, TrainOptions};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let row: u32 = std::env::args().nth(1).map_or(1, |a| a.parse().expect("row number 1-12"));

    let spec = DriftSpec::stationary(10, 50, date("2016-01-01"), date("2021-01-01"), 42).with_event(DriftEvent {
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

    let settings = RunSettings::new(date("2019-01-01"), date("2021-01-01"), 7);
    let scenario = ScenarioConfig::table_row(row, &settings)?;
    println!(
        "row {row}: {} split, {} finetuning, {} data, {} schedule",
        scenario.split_strategy.as_str(),
        scenario.finetune_mode.as_str(),
        scenario.inclusion.as_str(),
        scenario.schedule.as_str()
    );
    let report = sim.run_scenario(&scenario)?;
    println!("research-phase test weighted-F1 {:.4}", report.research_test_score);

    for r in report.weekly.iter().step_by(4) {
        println!(
            "  {} window {:3} docs  score {}  threshold {:.4}  streak {}",
            r.week_end,
            r.window_size,
            r.window_score.map_or("  -   ".into(), |s| format!("{s:.4}")),
            r.threshold,
            r.streak
        );
    }
    for e in &report.retraining_events {
        println!(
            "retraining on {} ({:?}): {} new docs, train/val/test {}/{}/{}, challenger {:?} vs champion {:?}, promoted {}",
            e.trigger_date,
            e.trigger_reason,
            e.new_documents,
            e.train_size,
            e.validation_size,
            e.test_size,
            e.challenger_score.map(|s| (s * 1e4).round() / 1e4),
            e.champion_score.map(|s| (s * 1e4).round() / 1e4),
            e.promoted
        );
    }
    println!(
        "average monitoring weighted-F1 {:.4}, {} retraining(s), {:.2}s retraining time",
        report.avg_monitoring_performance,
        report.retraining_count,
        report.total_retraining_time.as_secs_f64()
    );
    println!("access audit: {:?}", report.audit);
    Ok(())
}
