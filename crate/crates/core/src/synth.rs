//! Synthetic timestamped multilabel corpora with scheduled drift.
//!
//! Every label owns a disjoint pool of tokens. A document draws 1..k labels
//! from the current label prior, then draws its tokens from those labels'
//! current pools, mixed with label-free noise tokens. Drift events rewrite
//! pools (`vocabulary_shift`), reweight priors (`label_prior_shift`) or
//! switch on a dormant label (`label_emergence`).

use std::path::Path;

use chrono::NaiveDate;
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, LabelSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    VocabularyShift,
    LabelPriorShift,
    LabelEmergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEvent {
    pub date: NaiveDate,
    pub kind: DriftKind,
    /// In (0,1].
    pub magnitude: f64,
    /// Target label names; all labels when absent. Required for emergence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub seed: u64,
    pub n_labels: usize,
    pub docs_per_week: usize,
    /// Inclusive.
    pub start: NaiveDate,
    /// Exclusive.
    pub end: NaiveDate,
    #[serde(default = "defaults::tokens_per_label")]
    pub tokens_per_label: usize,
    #[serde(default = "defaults::noise_vocabulary")]
    pub noise_vocabulary: usize,
    #[serde(default = "defaults::noise_rate")]
    pub noise_rate: f64,
    #[serde(default = "defaults::min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "defaults::max_tokens")]
    pub max_tokens: usize,
    /// Relative weight of a document carrying 1, 2, 3, ... labels.
    #[serde(default = "defaults::label_count_weights")]
    pub label_count_weights: Vec<f64>,
    /// Label `i` has prior weight `1 / (i + 1)^prior_skew`.
    #[serde(default = "defaults::prior_skew")]
    pub prior_skew: f64,
    #[serde(default)]
    pub drift_events: Vec<DriftEvent>,
}

mod defaults {
    pub fn tokens_per_label() -> usize {
        24
    }
    pub fn noise_vocabulary() -> usize {
        400
    }
    pub fn noise_rate() -> f64 {
        0.3
    }
    pub fn min_tokens() -> usize {
        10
    }
    pub fn max_tokens() -> usize {
        50
    }
    /// 90% of documents carry three or fewer labels.
    pub fn label_count_weights() -> Vec<f64> {
        vec![0.45, 0.30, 0.15, 0.06, 0.04]
    }
    pub fn prior_skew() -> f64 {
        0.8
    }
}

pub fn label_name(i: usize) -> String {
    format!("L{i:02}")
}

impl DriftSpec {
    /// Stationary spec with default shape parameters.
    pub fn stationary(n_labels: usize, docs_per_week: usize, start: NaiveDate, end: NaiveDate, seed: u64) -> Self {
        DriftSpec {
            seed,
            n_labels,
            docs_per_week,
            start,
            end,
            tokens_per_label: defaults::tokens_per_label(),
            noise_vocabulary: defaults::noise_vocabulary(),
            noise_rate: defaults::noise_rate(),
            min_tokens: defaults::min_tokens(),
            max_tokens: defaults::max_tokens(),
            label_count_weights: defaults::label_count_weights(),
            prior_skew: defaults::prior_skew(),
            drift_events: Vec::new(),
        }
    }

    pub fn with_event(mut self, event: DriftEvent) -> Self {
        self.drift_events.push(event);
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: DriftSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DriftSpec::from_toml(&text)
    }

    fn target_labels(&self, event: &DriftEvent) -> Result<Vec<usize>> {
        match &event.labels {
            None => Ok((0..self.n_labels).collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    (0..self.n_labels)
                        .find(|&i| label_name(i) == *n)
                        .ok_or_else(|| Error::UnknownLabel { label: n.clone() })
                })
                .collect(),
        }
    }

    fn dormant(&self) -> Result<Vec<bool>> {
        let mut dormant = vec![false; self.n_labels];
        for e in self.drift_events.iter().filter(|e| e.kind == DriftKind::LabelEmergence) {
            for l in self.target_labels(e)? {
                dormant[l] = true;
            }
        }
        Ok(dormant)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("drift spec: {m}")));
        if self.n_labels < 2 {
            return bad(format!("n_labels must be >= 2, got {}", self.n_labels));
        }
        if self.docs_per_week == 0 {
            return bad("docs_per_week must be positive".into());
        }
        if self.start >= self.end {
            return bad(format!("start {} must precede end {}", self.start, self.end));
        }
        if self.tokens_per_label == 0 || self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token counts must be positive with min_tokens <= max_tokens".into());
        }
        if !(0.0..1.0).contains(&self.noise_rate) || (self.noise_rate > 0.0 && self.noise_vocabulary == 0) {
            return bad("noise_rate must lie in [0,1) with a non-empty noise vocabulary".into());
        }
        if self.label_count_weights.is_empty()
            || self.label_count_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
            || self.label_count_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("label_count_weights must be non-negative with a positive sum".into());
        }
        if !self.prior_skew.is_finite() || self.prior_skew < 0.0 {
            return bad("prior_skew must be finite and non-negative".into());
        }
        for e in &self.drift_events {
            if e.date < self.start || e.date >= self.end {
                return Err(Error::DriftOutsideSpan(e.date));
            }
            if !(e.magnitude > 0.0 && e.magnitude <= 1.0) {
                return bad(format!("magnitude must lie in (0,1], got {}", e.magnitude));
            }
            if e.kind == DriftKind::LabelEmergence && e.labels.is_none() {
                return bad("label_emergence needs explicit labels".into());
            }
            self.target_labels(e)?;
        }
        if self.dormant()?.iter().filter(|d| !**d).count() < 1 {
            return bad("at least one label must be active at the start".into());
        }
        Ok(())
    }
}

/// Generator output: the corpus plus the per-week document counts.
#[derive(Debug, Clone)]
pub struct Generated {
    pub corpus: Corpus,
    /// `(week_start, documents generated in that week)`.
    pub weekly_counts: Vec<(NaiveDate, usize)>,
}

struct World {
    pools: Vec<Vec<String>>,
    priors: Vec<f64>,
    generation: Vec<usize>,
}

impl World {
    fn vocabulary_shift(&mut self, labels: &[usize], magnitude: f64, rng: &mut ChaCha8Rng) {
        for &l in labels {
            let pool = &mut self.pools[l];
            let replace = ((pool.len() as f64 * magnitude).round() as usize).clamp(1, pool.len());
            self.generation[l] += 1;
            let mut slots: Vec<usize> = (0..pool.len()).collect();
            slots.shuffle(rng);
            for (k, &slot) in slots[..replace].iter().enumerate() {
                pool[slot] = format!("w{l:02}g{}x{k:03}", self.generation[l]);
            }
        }
    }

    fn prior_shift(&mut self, labels: &[usize], magnitude: f64, rng: &mut ChaCha8Rng) {
        let active: Vec<usize> = labels.iter().copied().filter(|&l| self.priors[l] > 0.0).collect();
        let mut permuted: Vec<f64> = active.iter().map(|&l| self.priors[l]).collect();
        permuted.shuffle(rng);
        for (&l, q) in active.iter().zip(permuted) {
            self.priors[l] = (1.0 - magnitude) * self.priors[l] + magnitude * q;
        }
    }

    fn emergence(&mut self, labels: &[usize], magnitude: f64) {
        let active: Vec<f64> = self.priors.iter().copied().filter(|p| *p > 0.0).collect();
        let mean = active.iter().sum::<f64>() / active.len() as f64;
        for &l in labels {
            self.priors[l] = magnitude * mean;
        }
    }
}

/// Generates the corpus described by `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &DriftSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dormant = spec.dormant()?;
    let mut world = World {
        pools: (0..spec.n_labels)
            .map(|l| (0..spec.tokens_per_label).map(|k| format!("w{l:02}x{k:03}")).collect())
            .collect(),
        priors: (0..spec.n_labels)
            .map(|l| if dormant[l] { 0.0 } else { 1.0 / ((l + 1) as f64).powf(spec.prior_skew) })
            .collect(),
        generation: vec![0; spec.n_labels],
    };
    let mut events = spec.drift_events.clone();
    events.sort_by_key(|e| e.date);
    let mut pending = events.into_iter().peekable();
    let count_dist = WeightedIndex::new(&spec.label_count_weights)
        .map_err(|e| Error::InvalidConfig(format!("label_count_weights: {e}")))?;

    let mut documents = Vec::new();
    let mut weekly_counts = Vec::new();
    let mut week_start = spec.start;
    while week_start < spec.end {
        let days = (spec.end - week_start).num_days().min(7);
        let count = ((spec.docs_per_week as f64) * days as f64 / 7.0).round() as usize;
        let mut offsets: Vec<i64> = (0..count).map(|_| rng.gen_range(0..days)).collect();
        offsets.sort_unstable();
        for offset in offsets {
            let day = week_start + chrono::Duration::days(offset);
            while let Some(e) = pending.next_if(|e| e.date <= day) {
                let targets = spec.target_labels(&e)?;
                match e.kind {
                    DriftKind::VocabularyShift => world.vocabulary_shift(&targets, e.magnitude, &mut rng),
                    DriftKind::LabelPriorShift => world.prior_shift(&targets, e.magnitude, &mut rng),
                    DriftKind::LabelEmergence => world.emergence(&targets, e.magnitude),
                }
            }
            let id = format!("doc{:07}", documents.len());
            documents.push(sample_document(spec, &world, &count_dist, id, day, &mut rng));
        }
        weekly_counts.push((week_start, count));
        week_start += chrono::Duration::days(7);
    }

    let space = LabelSpace::new((0..spec.n_labels).map(label_name).collect())?;
    Ok(Generated { corpus: Corpus::new(documents, space)?, weekly_counts })
}

fn sample_document(
    spec: &DriftSpec,
    world: &World,
    count_dist: &WeightedIndex<f64>,
    id: String,
    day: NaiveDate,
    rng: &mut ChaCha8Rng,
) -> Document {
    let active = world.priors.iter().filter(|p| **p > 0.0).count();
    let k = (count_dist.sample(rng) + 1).min(active);
    let mut weights = world.priors.clone();
    let mut labels = Vec::with_capacity(k);
    for _ in 0..k {
        let l = WeightedIndex::new(&weights).expect("positive prior mass remains").sample(rng);
        labels.push(l);
        weights[l] = 0.0;
    }
    let n_tokens = rng.gen_range(spec.min_tokens..=spec.max_tokens);
    let mut tokens = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        if rng.gen_bool(spec.noise_rate) {
            tokens.push(format!("n{:03}", rng.gen_range(0..spec.noise_vocabulary)));
        } else {
            let pool = &world.pools[labels[rng.gen_range(0..labels.len())]];
            tokens.push(pool[rng.gen_range(0..pool.len())].clone());
        }
    }
    Document::new(id, day, tokens.join(" "), labels.into_iter().map(label_name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn small() -> DriftSpec {
        DriftSpec::stationary(8, 50, d("2000-01-01"), d("2000-06-01"), 3)
    }

    #[test]
    fn deterministic_serialization() {
        let a = generate(&small()).unwrap().corpus.to_jsonl();
        let b = generate(&small()).unwrap().corpus.to_jsonl();
        assert_eq!(a, b);
        let mut other = small();
        other.seed = 4;
        assert_ne!(a, generate(&other).unwrap().corpus.to_jsonl());
    }

    #[test]
    fn weekly_counts_match_slices() {
        let g = generate(&small()).unwrap();
        for w in g.weekly_counts.windows(2).take(10) {
            let n = g.corpus.slice_by_date(w[0].0, w[1].0).unwrap().len();
            assert_eq!(n, w[0].1);
        }
        let total: usize = g.weekly_counts.iter().map(|w| w.1).sum();
        assert_eq!(total, g.corpus.len());
        // weeks 0-3 together
        let first4: usize = g.weekly_counts[..4].iter().map(|w| w.1).sum();
        assert_eq!(g.corpus.slice_by_date(g.weekly_counts[0].0, g.weekly_counts[4].0).unwrap().len(), first4);
    }

    #[test]
    fn label_count_shape() {
        let g = generate(&DriftSpec::stationary(35, 500, d("2000-01-01"), d("2000-03-01"), 1)).unwrap();
        let docs = g.corpus.documents();
        let small = docs.iter().filter(|d| d.labels.len() <= 3).count() as f64 / docs.len() as f64;
        assert!((small - 0.90).abs() < 0.02, "share with <=3 labels: {small}");
        assert!(docs.iter().all(|d| !d.labels.is_empty()));
    }

    #[test]
    fn validation_errors() {
        let outside = small().with_event(DriftEvent {
            date: d("2001-01-01"),
            kind: DriftKind::VocabularyShift,
            magnitude: 0.5,
            labels: None,
        });
        let err = generate(&outside).unwrap_err();
        assert_eq!(err.to_string(), "drift event outside corpus span: 2001-01-01");
        let zero = small().with_event(DriftEvent {
            date: d("2000-02-01"),
            kind: DriftKind::VocabularyShift,
            magnitude: 0.0,
            labels: None,
        });
        assert!(generate(&zero).is_err());
        let emergence = small().with_event(DriftEvent {
            date: d("2000-02-01"),
            kind: DriftKind::LabelEmergence,
            magnitude: 1.0,
            labels: None,
        });
        assert!(generate(&emergence).is_err());
    }

    #[test]
    fn emergence_activates_dormant_label() {
        let spec = small().with_event(DriftEvent {
            date: d("2000-03-01"),
            kind: DriftKind::LabelEmergence,
            magnitude: 1.0,
            labels: Some(vec!["L03".into()]),
        });
        let g = generate(&spec).unwrap();
        let before = g.corpus.slice_by_date(d("2000-01-01"), d("2000-03-01")).unwrap();
        let after = g.corpus.slice_by_date(d("2000-03-01"), d("2000-06-01")).unwrap();
        assert!(before.iter().all(|doc| !doc.has_label("L03")));
        assert!(after.iter().any(|doc| doc.has_label("L03")));
    }

    #[test]
    fn vocabulary_shift_replaces_tokens() {
        let spec = small().with_event(DriftEvent {
            date: d("2000-03-01"),
            kind: DriftKind::VocabularyShift,
            magnitude: 1.0,
            labels: None,
        });
        let g = generate(&spec).unwrap();
        let after = g.corpus.slice_by_date(d("2000-03-01"), d("2000-06-01")).unwrap();
        // every label token after a full shift carries a generation tag
        for doc in after {
            for t in doc.text.split(' ').filter(|t| t.starts_with('w')) {
                assert!(t.contains('g'), "{t}");
            }
        }
    }

    #[test]
    fn toml_round_trip() {
        let spec = small().with_event(DriftEvent {
            date: d("2000-03-01"),
            kind: DriftKind::LabelPriorShift,
            magnitude: 0.5,
            labels: Some(vec!["L01".into(), "L02".into()]),
        });
        assert_eq!(DriftSpec::from_toml(&spec.to_toml()).unwrap(), spec);
    }
}
