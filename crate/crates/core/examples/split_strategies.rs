//! Compare iterative stratification, chronological and uniform random splits
//! on a skewed multilabel corpus.
//!
//! ```bash
//! cargo run --example split_strategies
//! ```

use chrono::NaiveDate;
use ctsim::corpus::DocumentSource;
use ctsim::splitter::{
    chronological_split, iterative_stratified_split, mean_prevalence_deviation, random_split, SplitRatio,
};
use ctsim::synth::{generate, DriftSpec};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let corpus = generate(&DriftSpec::stationary(20, 25, date("2020-01-01"), date("2021-01-01"), 5))?.corpus;
    let docs: Vec<_> = corpus.documents().iter().collect();
    let ratio = SplitRatio::default();
    println!("{} documents, sizes {:?} for ratio {:?}", docs.len(), ratio.sizes(docs.len())?, ratio.fractions());

    let stratified = iterative_stratified_split(&docs, ratio, 1)?;
    let chronological = chronological_split(&docs, ratio)?;
    let random = random_split(&docs, ratio, 1)?;
    for (name, split) in [("stratified", &stratified), ("chronological", &chronological), ("random", &random)] {
        split.check_partition(docs.iter().map(|d| d.id.as_str()))?;
        println!(
            "{name:>13}: train {:4} val {:4} test {:4}  mean prevalence deviation {:.4}",
            split.train.len(),
            split.validation.len(),
            split.test.len(),
            mean_prevalence_deviation(&docs, split)
        );
    }

    // chronological: every training document precedes every test document
    let last_train = chronological.train.iter().filter_map(|id| corpus.document(id)).map(|d| d.timestamp).max();
    let first_test = chronological.test.iter().filter_map(|id| corpus.document(id)).map(|d| d.timestamp).min();
    println!("chronological: last train date {last_train:?}, first test date {first_test:?}");

    let manifest = stratified.to_manifest_json();
    println!("manifest starts: {}", manifest.lines().take(6).collect::<Vec<_>>().join(" "));
    Ok(())
}
