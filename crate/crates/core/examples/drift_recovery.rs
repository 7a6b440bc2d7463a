//! How much does retraining buy after a vocabulary shift? Compares a
//! never-retrained champion with every strategy-matrix row.
//!
//! The default is a small corpus; `--full` uses 35 labels, 100 documents a
//! week and 31 years of history.
//!
//! ```bash
//! cargo run --release --example drift_recovery -- --full
//! ```

use std::time::Instant;

use chrono::NaiveDate;
use ctsim::corpus::FeatureDim;
use ctsim::orchestrator::{RunSettings, ScenarioConfig, Simulator};
use ctsim::synth::{generate, DriftEvent, DriftKind, DriftSpec};
use ctsim::trainer::{LinearLearner, TrainOptions};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let full = std::env::args().any(|a| a == "--full");
    let (labels, per_week, start) = if full { (35, 100, "1990-01-01") } else { (12, 60, "2014-01-01") };
    let started = Instant::now();

    let spec = DriftSpec::stationary(labels, per_week, date(start), date("2021-01-01"), 42).with_event(DriftEvent {
        date: date("2019-04-01"),
        kind: DriftKind::VocabularyShift,
        magnitude: 0.5,
        labels: None,
    });
    let corpus = generate(&spec)?.corpus;
    let dim = FeatureDim::default();
    let encoded = corpus.encode(dim);
    let learner = LinearLearner::new(labels, dim, TrainOptions::default());
    let sim = Simulator::new(&corpus, &encoded, &learner)?;
    println!("{} documents, {} labels", corpus.len(), labels);

    let settings = RunSettings::new(date("2019-01-01"), date("2021-01-01"), 7);
    let scenarios = ScenarioConfig::table(&settings);
    let baseline = sim.run_static(&scenarios[0])?;
    println!(
        "never retrained: research {:.4}, monitoring average {:.4}",
        baseline.research_test_score, baseline.avg_monitoring_performance
    );
    for (cfg, result) in sim.run_matrix(&scenarios, 1) {
        let r = result?;
        println!(
            "row {:2} ({:>13} {:>11} {:>16} {:>14}): average {:.4} ({:+.4} vs never retrained), {:2} retraining(s), {:7.2}s",
            cfg.number,
            cfg.split_strategy.as_str(),
            cfg.finetune_mode.as_str(),
            cfg.inclusion.as_str(),
            cfg.schedule.as_str(),
            r.avg_monitoring_performance,
            r.avg_monitoring_performance - baseline.avg_monitoring_performance,
            r.retraining_count,
            r.total_retraining_time.as_secs_f64()
        );
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
