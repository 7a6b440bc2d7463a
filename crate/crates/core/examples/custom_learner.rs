//! Plug a different model into the simulator through the `Learner` trait.
//! This one predicts every label whose training prevalence is at least
//! one half of the most common label's, ignoring the text entirely; it makes
//! a floor to compare the linear model against.
//!
//! ```bash
//! cargo run --release --example custom_learner
//! ```

use std::time::Instant;

use chrono::NaiveDate;
use ctsim::corpus::{EncodedDoc, FeatureDim};
use ctsim::orchestrator::{RunSettings, ScenarioConfig, Simulator};
use ctsim::synth::{generate, DriftSpec};
use ctsim::trainer::{Learner, LinearLearner, TrainOptions, TrainingBudget};

struct PriorLearner {
    n_labels: usize,
}

impl Learner for PriorLearner {
    type Model = Vec<usize>;

    fn fit(
        &self,
        _init: Option<&Vec<usize>>,
        train: &[&EncodedDoc],
        _val: &[&EncodedDoc],
        _seed: u64,
    ) -> ctsim::Result<(Vec<usize>, TrainingBudget)> {
        let started = Instant::now();
        let mut counts = vec![0usize; self.n_labels];
        for doc in train {
            for &l in &doc.labels {
                counts[l] += 1;
            }
        }
        let top = counts.iter().copied().max().unwrap_or(0);
        let model = (0..self.n_labels).filter(|&l| top > 0 && counts[l] * 2 >= top).collect();
        let budget = TrainingBudget { wall_clock: started.elapsed(), epochs_run: 1, examples_seen: train.len() };
        Ok((model, budget))
    }

    fn predict(&self, model: &Vec<usize>, _doc: &EncodedDoc) -> Vec<usize> {
        model.clone()
    }

    fn n_labels(&self) -> usize {
        self.n_labels
    }
}

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let corpus = generate(&DriftSpec::stationary(10, 50, date("2017-01-01"), date("2021-01-01"), 4))?.corpus;
    let dim = FeatureDim::default();
    let encoded = corpus.encode(dim);
    let scenario = ScenarioConfig::table_row(2, &RunSettings::new(date("2019-01-01"), date("2021-01-01"), 7))?;

    let prior = PriorLearner { n_labels: corpus.label_space().len() };
    let linear = LinearLearner::new(corpus.label_space().len(), dim, TrainOptions::default());
    let prior_report = Simulator::new(&corpus, &encoded, &prior)?.run_scenario(&scenario)?;
    let linear_report = Simulator::new(&corpus, &encoded, &linear)?.run_scenario(&scenario)?;
    println!("prior-only learner: average monitoring weighted-F1 {:.4}", prior_report.avg_monitoring_performance);
    println!("linear learner:     average monitoring weighted-F1 {:.4}", linear_report.avg_monitoring_performance);
    Ok(())
}
