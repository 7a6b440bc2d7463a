//! Train a champion, then build challengers with the three finetuning modes
//! and compare their cost and quality on post-drift data.
//!
//! ```bash
//! cargo run --release --example finetune_modes
//! ```

use chrono::NaiveDate;
use ctsim::corpus::{EncodedDoc, FeatureDim};
use ctsim::synth::{generate, DriftEvent, DriftKind, DriftSpec};
use ctsim::trainer::{gradient_check, train, FinetuneMode, Init, ModelState, TrainOptions};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let spec = DriftSpec::stationary(12, 80, date("2016-01-01"), date("2020-01-01"), 9).with_event(DriftEvent {
        date: date("2019-01-01"),
        kind: DriftKind::VocabularyShift,
        magnitude: 0.5,
        labels: None,
    });
    let corpus = generate(&spec)?.corpus;
    let dim = FeatureDim::default();
    let encoded = corpus.encode(dim);
    let n_labels = corpus.label_space().len();
    let options = TrainOptions::default();
    let period = |from: &str, to: &str, keep: usize| -> ctsim::Result<Vec<&EncodedDoc>> {
        let range = corpus.range_by_date(date(from), date(to))?;
        Ok(encoded[range].iter().enumerate().filter(|(i, _)| i % 5 == keep).map(|(_, d)| d).collect())
    };
    let fold = |from: &str, to: &str| -> ctsim::Result<(Vec<&EncodedDoc>, Vec<&EncodedDoc>)> {
        let train = (1..5).map(|k| period(from, to, k)).collect::<ctsim::Result<Vec<_>>>()?.concat();
        Ok((train, period(from, to, 0)?))
    };

    let (old_train, old_val) = fold("2016-01-01", "2019-01-01")?;
    let (new_train, new_val) = fold("2019-01-01", "2019-07-01")?;
    let evaluation = period("2019-07-01", "2020-01-01", 0)?;

    let (champion, budget) = train(Init::Fresh, &old_train, &old_val, n_labels, dim, &options, 1)?;
    println!(
        "champion: {} epochs, {} examples; post-drift score {:.4}",
        budget.epochs_run,
        budget.examples_seen,
        champion.score(&evaluation)
    );
    let batch: Vec<_> = new_train.iter().take(8).copied().collect();
    println!("gradient check on 8 documents: max relative error {:.2e}", gradient_check(&champion, &batch, 3));

    let union: Vec<_> = old_train.iter().chain(&new_train).copied().collect();
    let union_val: Vec<_> = old_val.iter().chain(&new_val).copied().collect();
    for mode in [FinetuneMode::Incremental, FinetuneMode::Cumulative, FinetuneMode::Checkpoint] {
        let (docs, val) = if mode.uses_history() { (&union, &union_val) } else { (&new_train, &new_val) };
        let init = if mode.warm_start() { Init::From(&champion) } else { Init::Fresh };
        let (model, budget): (ModelState, _) = train(init, docs, val, n_labels, dim, &options, 2)?;
        println!(
            "{:>11}: trained on {:6} docs, {:2} epochs, {:8} examples, {:6.2}s; post-drift score {:.4}",
            mode.as_str(),
            docs.len(),
            budget.epochs_run,
            budget.examples_seen,
            budget.seconds(),
            model.score(&evaluation)
        );
    }

    let path = std::env::temp_dir().join("ctsim_champion.json");
    champion.save_json(&path, corpus.label_space())?;
    let reloaded = ModelState::load_json(&path, corpus.label_space())?;
    println!("saved and reloaded champion; identical: {}", reloaded == champion);
    Ok(())
}
