//! Multilabel evaluation: per-label precision/recall/F1 and weighted-F1.
//!
//! Label sets are slices of label indices. Every ratio with a zero
//! denominator is defined as 0.

use crate::corpus::LabelSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LabelScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub weighted_f1: f64,
    pub micro_f1: f64,
    /// Mean F1 over labels that occur in the gold or predicted sets.
    pub macro_f1: f64,
    /// Indexed by label index.
    pub per_label: Vec<LabelScore>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Running true-positive / false-positive / false-negative counts.
#[derive(Debug, Clone)]
pub struct Confusion {
    tp: Vec<u64>,
    fp: Vec<u64>,
    fn_: Vec<u64>,
}

impl Confusion {
    pub fn new(n_labels: usize) -> Self {
        Confusion { tp: vec![0; n_labels], fp: vec![0; n_labels], fn_: vec![0; n_labels] }
    }

    pub fn n_labels(&self) -> usize {
        self.tp.len()
    }

    /// Adds one instance. Both slices must be sorted and duplicate-free.
    pub fn add(&mut self, predicted: &[usize], gold: &[usize]) -> Result<()> {
        let n = self.n_labels();
        if let Some(&bad) = predicted.iter().chain(gold).find(|&&l| l >= n) {
            return Err(Error::UnknownLabel { label: format!("#{bad}") });
        }
        let (mut i, mut j) = (0, 0);
        while i < predicted.len() || j < gold.len() {
            match (predicted.get(i), gold.get(j)) {
                (Some(&p), Some(&g)) if p == g => {
                    self.tp[p] += 1;
                    i += 1;
                    j += 1;
                }
                (Some(&p), Some(&g)) if p < g => {
                    self.fp[p] += 1;
                    i += 1;
                }
                (Some(&p), None) => {
                    self.fp[p] += 1;
                    i += 1;
                }
                (_, Some(&g)) => {
                    self.fn_[g] += 1;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn label_score(&self, label: usize) -> LabelScore {
        let (tp, fp, fn_) = (self.tp[label], self.fp[label], self.fn_[label]);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        LabelScore { precision, recall, f1: harmonic(precision, recall), support: tp + fn_ }
    }

    pub fn weighted_f1(&self) -> f64 {
        let (num, den) = (0..self.n_labels()).fold((0.0, 0u64), |(num, den), l| {
            let s = self.label_score(l);
            (num + s.support as f64 * s.f1, den + s.support)
        });
        if den == 0 {
            0.0
        } else {
            num / den as f64
        }
    }

    pub fn result(&self) -> EvalResult {
        let per_label: Vec<LabelScore> = (0..self.n_labels()).map(|l| self.label_score(l)).collect();
        let tp: u64 = self.tp.iter().sum();
        let fp: u64 = self.fp.iter().sum();
        let fn_: u64 = self.fn_.iter().sum();
        let micro_f1 = harmonic(ratio(tp, tp + fp), ratio(tp, tp + fn_));
        let active: Vec<f64> = (0..self.n_labels())
            .filter(|&l| self.tp[l] + self.fp[l] + self.fn_[l] > 0)
            .map(|l| per_label[l].f1)
            .collect();
        let macro_f1 =
            if active.is_empty() { 0.0 } else { active.iter().sum::<f64>() / active.len() as f64 };
        EvalResult { weighted_f1: self.weighted_f1(), micro_f1, macro_f1, per_label }
    }
}

/// Scores predicted label sets against gold label sets.
pub fn evaluate<P, G>(predictions: &[P], gold: &[G], label_space: &LabelSpace) -> Result<EvalResult>
where
    P: AsRef<[usize]>,
    G: AsRef<[usize]>,
{
    evaluate_indices(predictions, gold, label_space.len())
}

/// As [`evaluate`], with the label space given by its size.
pub fn evaluate_indices<P, G>(predictions: &[P], gold: &[G], n_labels: usize) -> Result<EvalResult>
where
    P: AsRef<[usize]>,
    G: AsRef<[usize]>,
{
    if predictions.len() != gold.len() || gold.is_empty() {
        return Err(Error::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    let mut c = Confusion::new(n_labels);
    for (p, g) in predictions.iter().zip(gold) {
        let (mut p, mut g) = (p.as_ref().to_vec(), g.as_ref().to_vec());
        p.sort_unstable();
        p.dedup();
        g.sort_unstable();
        g.dedup();
        c.add(&p, &g)?;
    }
    Ok(c.result())
}
