#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use ctsim::corpus::{Corpus, Document, LabelSpace};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date")
}

/// A small random multilabel corpus: skewed label frequencies, 1-3 labels
/// per document, dates spread over two years.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_docs: usize, n_labels: usize) -> Corpus {
    let labels: Vec<String> = (0..n_labels).map(|l| format!("lab{l:02}")).collect();
    let weights: Vec<f64> = (0..n_labels).map(|l| 1.0 / (1.0 + l as f64)).collect();
    let total: f64 = weights.iter().sum();
    let start = date("2019-01-01");
    let docs = (0..n_docs)
        .map(|i| {
            let k = rng.gen_range(1..=3.min(n_labels));
            let mut chosen = BTreeSet::new();
            while chosen.len() < k {
                let mut u = rng.gen::<f64>() * total;
                let mut pick = n_labels - 1;
                for (l, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = l;
                        break;
                    }
                    u -= w;
                }
                chosen.insert(pick);
            }
            let text: Vec<String> = chosen.iter().map(|l| format!("tok{l} word{}", rng.gen_range(0..50))).collect();
            Document::new(
                format!("d{i:05}"),
                start + Days::new(rng.gen_range(0..730)),
                text.join(" "),
                chosen.iter().map(|&l| labels[l].clone()),
            )
        })
        .collect();
    Corpus::new(docs, LabelSpace::new(labels).expect("valid labels")).expect("valid corpus")
}

/// Weighted F1 computed label by label from explicit membership tests.
pub fn brute_force_weighted_f1(pred: &[Vec<usize>], gold: &[Vec<usize>], n_labels: usize) -> f64 {
    let mut weighted = 0.0;
    let mut support_total = 0usize;
    for label in 0..n_labels {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, g) in pred.iter().zip(gold) {
            match (p.contains(&label), g.contains(&label)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        let support = tp + fn_;
        weighted += f1 * support as f64;
        support_total += support;
    }
    if support_total == 0 {
        0.0
    } else {
        weighted / support_total as f64
    }
}

/// Random predicted and gold label sets over `n_labels`.
pub fn random_multilabel(rng: &mut ChaCha8Rng, n: usize, n_labels: usize) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let draw = |rng: &mut ChaCha8Rng, min: usize| -> Vec<usize> {
        let mut set: Vec<usize> = (0..n_labels).filter(|_| rng.gen_bool(0.3)).collect();
        if set.len() < min {
            set.push(rng.gen_range(0..n_labels));
        }
        set.sort_unstable();
        set.dedup();
        set
    };
    let gold = (0..n).map(|_| draw(rng, 1)).collect();
    let pred = (0..n).map(|_| draw(rng, 0)).collect();
    (pred, gold)
}
