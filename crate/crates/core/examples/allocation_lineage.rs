//! Follow five retraining rounds through each of the four data-allocation
//! workflows and watch the research-phase test set dilute.
//!
//! ```bash
//! cargo run --example allocation_lineage
//! ```

use std::collections::HashSet;
use std::sync::Arc;

use chrono::{Months, NaiveDate};
use ctsim::allocation::{AllocationPolicy, Inclusion};
use ctsim::splitter::{chronological_split, iterative_stratified_split, SplitRatio, SplitStrategy};
use ctsim::synth::{generate, DriftSpec};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let start = date("2019-01-01");
    let corpus = generate(&DriftSpec::stationary(10, 40, start, date("2022-01-01"), 3))?.corpus;
    let ratio = SplitRatio::default();
    let cutoff = date("2020-01-01");

    for strategy in [SplitStrategy::Stratified, SplitStrategy::Chronological] {
        for inclusion in [Inclusion::NewOnly, Inclusion::NewPlusOld] {
            let policy = AllocationPolicy::new(strategy, inclusion, 0.5)?;
            println!("\n{} / {} ({:?})", strategy.as_str(), inclusion.as_str(), policy.workflow());
            let research: Vec<_> = corpus.slice_by_date(start, cutoff)?.iter().collect();
            let first = match strategy {
                SplitStrategy::Stratified => iterative_stratified_split(&research, ratio, 11)?,
                SplitStrategy::Chronological => chronological_split(&research, ratio)?,
            };
            let original_test: HashSet<String> = first.test.iter().cloned().collect();
            let mut prev = Arc::new(first);
            let mut from = cutoff;
            for k in 1..=5u64 {
                let to = from + Months::new(2);
                let new_docs: Vec<_> = corpus.slice_by_date(from, to)?.iter().collect();
                let split = policy.allocate(&new_docs, &prev, &corpus, ratio, 100 + k)?;
                let carried = split.test.iter().filter(|id| original_test.contains(*id)).count();
                println!(
                    "  round {k}: new {:4}  train {:4} val {:4} test {:4}  research test ids still in test {:4} ({:.3} of original)  lineage depth {}",
                    new_docs.len(),
                    split.train.len(),
                    split.validation.len(),
                    split.test.len(),
                    carried,
                    carried as f64 / original_test.len() as f64,
                    split.lineage_depth(),
                );
                prev = Arc::new(split);
                from = to;
            }
        }
    }
    Ok(())
}
