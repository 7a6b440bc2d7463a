//! Generate a synthetic corpus with a vocabulary shift and look at it.
//!
//! ```bash
//! cargo run --example generate_corpus -- /tmp/corpus.jsonl
//! ```

use chrono::NaiveDate;
use ctsim::synth::{generate, DriftEvent, DriftKind, DriftSpec};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    let spec = DriftSpec::stationary(8, 60, date("2018-01-01"), date("2021-01-01"), 42)
        .with_event(DriftEvent {
            date: date("2019-07-01"),
            kind: DriftKind::VocabularyShift,
            magnitude: 0.5,
            labels: None,
        })
        .with_event(DriftEvent {
            date: date("2020-01-01"),
            kind: DriftKind::LabelPriorShift,
            magnitude: 0.8,
            labels: Some(vec!["L00".into(), "L03".into()]),
        });

    println!("spec as TOML:\n{}", spec.to_toml());
    let generated = generate(&spec)?;
    let corpus = &generated.corpus;
    let (first, last) = corpus.date_range().expect("non-empty corpus");
    println!("{} documents from {first} to {last}, labels {:?}", corpus.len(), corpus.label_space().labels());

    // a document before and after the shift: the label tokens change family
    for day in ["2019-06-01", "2019-08-01"] {
        let doc = corpus.slice_by_date(date(day), date(day) + chrono::Days::new(7))?[0].clone();
        println!("{} {:?}: {}", doc.timestamp, doc.labels, doc.text.chars().take(90).collect::<String>());
    }

    let quarters: Vec<_> = generated.weekly_counts.chunks(13).map(|q| q.iter().map(|(_, n)| n).sum::<usize>()).collect();
    println!("documents per quarter: {quarters:?}");

    if let Some(path) = std::env::args().nth(1) {
        corpus.write_jsonl(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
