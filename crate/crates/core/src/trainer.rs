//! Model contract and the reference one-vs-rest logistic classifier.
//!
//! The reference model keeps one weight per (feature, label) pair, stored
//! feature-major so a sparse input touches contiguous memory. Training is
//! plain mini-batch SGD on summed binary cross-entropy, with validation
//! weighted-F1 early stopping.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{featurize, Document, EncodedDoc, FeatureDim, FeatureVector, LabelSpace};
use crate::error::{Error, Result};
use crate::metrics::Confusion;

pub const MODEL_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneMode {
    /// Warm start from the champion, new train set only.
    Incremental,
    /// Warm start from the champion, all historical train sets plus the new one.
    Cumulative,
    /// Fresh start, same data as cumulative.
    Checkpoint,
}

impl FinetuneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FinetuneMode::Incremental => "incremental",
            FinetuneMode::Cumulative => "cumulative",
            FinetuneMode::Checkpoint => "checkpoint",
        }
    }

    pub fn warm_start(self) -> bool {
        !matches!(self, FinetuneMode::Checkpoint)
    }

    pub fn uses_history(self) -> bool {
        !matches!(self, FinetuneMode::Incremental)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub evals_per_epoch: usize,
    /// Consecutive non-improving evaluations before stopping.
    pub patience: usize,
    pub min_improvement: f64,
    pub decision_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.1,
            batch_size: 32,
            max_epochs: 35,
            evals_per_epoch: 5,
            patience: 5,
            min_improvement: 0.001,
            decision_threshold: 0.5,
        }
    }
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("trainer: {m}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.evals_per_epoch == 0 || self.patience == 0 {
            return bad("batch_size, max_epochs, evals_per_epoch and patience must be positive");
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return bad("decision_threshold must lie in (0,1)");
        }
        if self.min_improvement.is_nan() || self.min_improvement < 0.0 {
            return bad("min_improvement must be non-negative");
        }
        Ok(())
    }
}

/// Measured cost of one training call.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingBudget {
    #[serde(with = "duration_secs")]
    pub wall_clock: Duration,
    pub epochs_run: usize,
    pub examples_seen: usize,
}

impl TrainingBudget {
    pub fn seconds(&self) -> f64 {
        self.wall_clock.as_secs_f64()
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        f64::deserialize(d).map(Duration::from_secs_f64)
    }
}

/// One entry of a model's training history. Wall-clock time is kept out so
/// that equal inputs give equal states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEvent {
    pub warm_start: bool,
    pub train_size: usize,
    pub val_size: usize,
    pub epochs_run: usize,
    pub examples_seen: usize,
    pub best_val_f1: f64,
}

/// Weights of the one-vs-rest linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    n_labels: usize,
    dimension: usize,
    /// `weights[feature * n_labels + label]`
    weights: Vec<f64>,
    bias: Vec<f64>,
    decision_threshold: f64,
    pub provenance: Vec<TrainingEvent>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ModelState {
    pub fn zeros(n_labels: usize, dimension: usize, decision_threshold: f64) -> Self {
        ModelState {
            n_labels,
            dimension,
            weights: vec![0.0; n_labels * dimension],
            bias: vec![0.0; n_labels],
            decision_threshold,
            provenance: Vec::new(),
        }
    }

    /// Weights and biases drawn uniformly from `[-scale, scale]`.
    pub fn random(n_labels: usize, dimension: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = ModelState::zeros(n_labels, dimension, 0.5);
        m.weights.iter_mut().chain(m.bias.iter_mut()).for_each(|w| *w = rng.gen_range(-scale..=scale));
        m
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn decision_threshold(&self) -> f64 {
        self.decision_threshold
    }

    pub fn weight(&self, label: usize, feature: usize) -> f64 {
        self.weights[feature * self.n_labels + label]
    }

    pub fn set_weight(&mut self, label: usize, feature: usize, value: f64) {
        self.weights[feature * self.n_labels + label] = value;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|w| w.is_finite())
    }

    fn logits_into(&self, x: &FeatureVector, out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        let l = self.n_labels;
        for (i, v) in x.iter() {
            let row = &self.weights[i * l..(i + 1) * l];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }

    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        let mut out = vec![0.0; self.n_labels];
        self.logits_into(x, &mut out);
        out
    }

    pub fn probabilities(&self, x: &FeatureVector) -> Vec<f64> {
        self.logits(x).into_iter().map(sigmoid).collect()
    }

    fn predict_with(&self, x: &FeatureVector, scratch: &mut [f64]) -> Vec<usize> {
        self.logits_into(x, scratch);
        scratch
            .iter()
            .enumerate()
            .filter(|(_, &z)| sigmoid(z) >= self.decision_threshold)
            .map(|(l, _)| l)
            .collect()
    }

    /// Labels whose probability reaches the decision threshold.
    pub fn predict(&self, x: &FeatureVector) -> Vec<usize> {
        let mut scratch = vec![0.0; self.n_labels];
        self.predict_with(x, &mut scratch)
    }

    pub fn predict_document(&self, doc: &Document) -> Result<Vec<usize>> {
        Ok(self.predict(&featurize(doc, FeatureDim::new(self.dimension)?)))
    }

    /// Weighted-F1 of this model on `docs`. Empty input scores 0.
    pub fn score(&self, docs: &[&EncodedDoc]) -> f64 {
        let mut confusion = Confusion::new(self.n_labels);
        let mut scratch = vec![0.0; self.n_labels];
        for d in docs {
            let p = self.predict_with(&d.features, &mut scratch);
            confusion.add(&p, &d.labels).expect("labels validated by trainer");
        }
        confusion.weighted_f1()
    }

    /// Summed binary cross-entropy over all examples and labels.
    pub fn loss(&self, batch: &[&EncodedDoc]) -> f64 {
        let mut z = vec![0.0; self.n_labels];
        let mut total = 0.0;
        for d in batch {
            self.logits_into(&d.features, &mut z);
            for (l, &zl) in z.iter().enumerate() {
                let y = if d.labels.binary_search(&l).is_ok() { 1.0 } else { 0.0 };
                total += softplus(zl) - y * zl;
            }
        }
        total
    }

    /// Analytic gradient of [`ModelState::loss`].
    pub fn gradient(&self, batch: &[&EncodedDoc]) -> Gradient {
        let mut g = Gradient { bias: vec![0.0; self.n_labels], weights: BTreeMap::new() };
        let mut z = vec![0.0; self.n_labels];
        for d in batch {
            self.logits_into(&d.features, &mut z);
            for (l, &zl) in z.iter().enumerate() {
                let y = if d.labels.binary_search(&l).is_ok() { 1.0 } else { 0.0 };
                let r = sigmoid(zl) - y;
                g.bias[l] += r;
                for (i, v) in d.features.iter() {
                    *g.weights.entry((l, i)).or_insert(0.0) += r * v;
                }
            }
        }
        g
    }

    pub fn save_json(&self, path: impl AsRef<Path>, labels: &LabelSpace) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&self.to_file(labels))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>, labels: &LabelSpace) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelState::from_file(serde_json::from_str(&text)?, labels)
    }

    pub fn to_file(&self, labels: &LabelSpace) -> ModelFile {
        let weights = (0..self.dimension)
            .flat_map(|f| (0..self.n_labels).map(move |l| (f, l)))
            .filter_map(|(f, l)| {
                let w = self.weight(l, f);
                (w != 0.0).then_some((f as u32, l as u32, w))
            })
            .collect();
        ModelFile {
            version: MODEL_FILE_VERSION,
            label_space_hash: labels.fingerprint(),
            n_labels: self.n_labels,
            dimension: self.dimension,
            decision_threshold: self.decision_threshold,
            bias: self.bias.clone(),
            weights,
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_file(file: ModelFile, labels: &LabelSpace) -> Result<Self> {
        if file.version != MODEL_FILE_VERSION {
            return Err(Error::ModelVersion(file.version));
        }
        if file.label_space_hash != labels.fingerprint() || file.n_labels != labels.len() {
            return Err(Error::LabelSpaceMismatch {
                expected: labels.fingerprint(),
                found: file.label_space_hash,
            });
        }
        let mut m = ModelState::zeros(file.n_labels, file.dimension, file.decision_threshold);
        if file.bias.len() != file.n_labels {
            return Err(Error::InvalidConfig("bias length does not match label count".into()));
        }
        m.bias = file.bias;
        for (f, l, w) in file.weights {
            let (f, l) = (f as usize, l as usize);
            if f >= m.dimension || l >= m.n_labels {
                return Err(Error::InvalidConfig(format!("weight index ({f},{l}) out of range")));
            }
            m.set_weight(l, f, w);
        }
        m.provenance = file.provenance;
        Ok(m)
    }
}

/// Serialized model: sparse non-zero weights plus the label-space fingerprint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub label_space_hash: u64,
    pub n_labels: usize,
    pub dimension: usize,
    pub decision_threshold: f64,
    pub bias: Vec<f64>,
    /// `(feature, label, weight)` triples.
    pub weights: Vec<(u32, u32, f64)>,
    pub provenance: Vec<TrainingEvent>,
}

/// Loss gradient: dense bias part, sparse weight part keyed by `(label, feature)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub bias: Vec<f64>,
    pub weights: BTreeMap<(usize, usize), f64>,
}

/// Compares the analytic gradient to central finite differences (h = 1e-5)
/// on up to 100 sampled coordinates and returns the largest relative error.
/// Coordinates are drawn from biases and from features present in `batch`.
pub fn gradient_check(model: &ModelState, batch: &[&EncodedDoc], seed: u64) -> f64 {
    const H: f64 = 1e-5;
    const SAMPLES: usize = 100;
    let analytic = model.gradient(batch);
    let mut features: Vec<usize> = batch.iter().flat_map(|d| d.features.iter().map(|(i, _)| i)).collect();
    features.sort_unstable();
    features.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let label = rng.gen_range(0..model.n_labels);
        let feature = if features.is_empty() || rng.gen_bool(0.2) {
            None
        } else {
            Some(features[rng.gen_range(0..features.len())])
        };
        let (original, exact) = match feature {
            None => (model.bias[label], analytic.bias[label]),
            Some(f) => (model.weight(label, f), analytic.weights.get(&(label, f)).copied().unwrap_or(0.0)),
        };
        let set = |p: &mut ModelState, v: f64| match feature {
            None => p.bias[label] = v,
            Some(f) => p.set_weight(label, f, v),
        };
        set(&mut probe, original + H);
        let up = probe.loss(batch);
        set(&mut probe, original - H);
        let down = probe.loss(batch);
        set(&mut probe, original);
        let numeric = (up - down) / (2.0 * H);
        let scale = exact.abs().max(numeric.abs());
        if scale > 1e-10 {
            worst = worst.max((exact - numeric).abs() / scale);
        }
    }
    worst
}

/// Where training starts.
#[derive(Debug, Clone, Copy)]
pub enum Init<'a> {
    Fresh,
    From(&'a ModelState),
}

/// Trains the reference model.
///
/// Each epoch visits `train_docs` in a seeded shuffle, in mini-batches; each
/// batch takes one step of `learning_rate` along the summed loss gradient.
/// Validation weighted-F1 is measured up to `evals_per_epoch` times per epoch
/// at evenly spaced batch boundaries, and once before training when warm
/// starting.
/// Training stops after `patience` consecutive evaluations that fail to beat
/// the best score by `min_improvement`, or after `max_epochs`. The weights
/// of the best evaluation are returned.
pub fn train(
    init: Init<'_>,
    train_docs: &[&EncodedDoc],
    val_docs: &[&EncodedDoc],
    n_labels: usize,
    dim: FeatureDim,
    options: &TrainOptions,
    seed: u64,
) -> Result<(ModelState, TrainingBudget)> {
    let started = Instant::now();
    options.validate()?;
    if train_docs.is_empty() || val_docs.is_empty() {
        return Err(Error::DegenerateSplit("train and validation sets must be non-empty".into()));
    }
    for d in train_docs.iter().chain(val_docs) {
        if let Some(&bad) = d.labels.iter().find(|&&l| l >= n_labels) {
            return Err(Error::UnknownLabel { label: format!("#{bad}") });
        }
        if d.features.dimension() != dim.get() {
            return Err(Error::InvalidConfig(format!(
                "feature dimension {} does not match model dimension {}",
                d.features.dimension(),
                dim.get()
            )));
        }
    }
    let mut model = match init {
        Init::Fresh => ModelState::zeros(n_labels, dim.get(), options.decision_threshold),
        Init::From(m) => {
            if m.n_labels != n_labels || m.dimension != dim.get() {
                return Err(Error::InvalidConfig("initial model shape does not match".into()));
            }
            m.clone()
        }
    };

    let n_batches = train_docs.len().div_ceil(options.batch_size);
    let mut eval_points: Vec<usize> = (1..=options.evals_per_epoch)
        .map(|k| (k * n_batches).div_ceil(options.evals_per_epoch))
        .collect();
    eval_points.dedup();

    // a warm start must beat its own starting point; a fresh start has none
    let mut best_score = match init {
        Init::From(_) => model.score(val_docs),
        Init::Fresh => f64::NEG_INFINITY,
    };
    let mut best = model.clone();
    let mut stale = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train_docs.len()).collect();
    let mut examples_seen = 0usize;
    let mut epochs_run = 0usize;
    let step = options.learning_rate;
    let mut residuals = vec![0.0; options.batch_size * n_labels];
    let mut z = vec![0.0; n_labels];

    'epochs: for epoch in 0..options.max_epochs {
        epochs_run = epoch + 1;
        order.shuffle(&mut rng);
        let mut next_eval = 0;
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(options.batch_size).enumerate() {
            // residuals for the whole batch against the pre-update weights
            for (k, &idx) in chunk.iter().enumerate() {
                let d = train_docs[idx];
                model.logits_into(&d.features, &mut z);
                let r = &mut residuals[k * n_labels..(k + 1) * n_labels];
                let mut gold = d.labels.iter().peekable();
                for (l, (&zl, rl)) in z.iter().zip(r.iter_mut()).enumerate() {
                    let y = if gold.peek() == Some(&&l) {
                        gold.next();
                        1.0
                    } else {
                        0.0
                    };
                    epoch_loss += softplus(zl) - y * zl;
                    *rl = sigmoid(zl) - y;
                }
            }
            for (k, &idx) in chunk.iter().enumerate() {
                let r = &residuals[k * n_labels..(k + 1) * n_labels];
                for (i, v) in train_docs[idx].features.iter() {
                    let row = &mut model.weights[i * n_labels..(i + 1) * n_labels];
                    for (w, rl) in row.iter_mut().zip(r) {
                        *w -= step * rl * v;
                    }
                }
                for (bias, rl) in model.bias.iter_mut().zip(r) {
                    *bias -= step * rl;
                }
            }
            examples_seen += chunk.len();
            if !epoch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch: epochs_run, loss: epoch_loss });
            }

            if eval_points.get(next_eval) == Some(&(b + 1)) {
                next_eval += 1;
                let score = model.score(val_docs);
                if score >= best_score + options.min_improvement {
                    best_score = score;
                    best.clone_from(&model);
                    stale = 0;
                } else {
                    stale += 1;
                    if stale >= options.patience {
                        break 'epochs;
                    }
                }
            }
        }
    }

    best.provenance.push(TrainingEvent {
        warm_start: matches!(init, Init::From(_)),
        train_size: train_docs.len(),
        val_size: val_docs.len(),
        epochs_run,
        examples_seen,
        best_val_f1: best_score,
    });
    let budget = TrainingBudget { wall_clock: started.elapsed(), epochs_run, examples_seen };
    Ok((best, budget))
}

/// A trainable multilabel model backend.
pub trait Learner: Sync {
    type Model: Clone + Send + Sync;

    /// Trains from `init` (or from scratch when `None`).
    fn fit(
        &self,
        init: Option<&Self::Model>,
        train: &[&EncodedDoc],
        val: &[&EncodedDoc],
        seed: u64,
    ) -> Result<(Self::Model, TrainingBudget)>;

    fn predict(&self, model: &Self::Model, doc: &EncodedDoc) -> Vec<usize>;

    fn n_labels(&self) -> usize;

    /// Weighted-F1 of `model` on `docs`.
    fn score(&self, model: &Self::Model, docs: &[&EncodedDoc]) -> f64 {
        let mut confusion = Confusion::new(self.n_labels());
        for d in docs {
            confusion
                .add(&self.predict(model, d), &d.labels)
                .expect("prediction within label space");
        }
        confusion.weighted_f1()
    }
}

/// The reference linear learner.
#[derive(Debug, Clone)]
pub struct LinearLearner {
    pub n_labels: usize,
    pub dim: FeatureDim,
    pub options: TrainOptions,
}

impl LinearLearner {
    pub fn new(n_labels: usize, dim: FeatureDim, options: TrainOptions) -> Self {
        LinearLearner { n_labels, dim, options }
    }
}

impl Learner for LinearLearner {
    type Model = ModelState;

    fn fit(
        &self,
        init: Option<&ModelState>,
        train_docs: &[&EncodedDoc],
        val: &[&EncodedDoc],
        seed: u64,
    ) -> Result<(ModelState, TrainingBudget)> {
        let init = init.map_or(Init::Fresh, Init::From);
        train(init, train_docs, val, self.n_labels, self.dim, &self.options, seed)
    }

    fn predict(&self, model: &ModelState, doc: &EncodedDoc) -> Vec<usize> {
        model.predict(&doc.features)
    }

    fn n_labels(&self) -> usize {
        self.n_labels
    }

    fn score(&self, model: &ModelState, docs: &[&EncodedDoc]) -> f64 {
        model.score(docs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIM: usize = 1 << 10;

    fn dim() -> FeatureDim {
        FeatureDim::new(DIM).unwrap()
    }

    fn doc(position: usize, text: &str, labels: Vec<usize>) -> EncodedDoc {
        EncodedDoc { position, features: crate::corpus::featurize_text(text, dim()), labels }
    }

    /// Label 0 iff token "red", label 1 iff token "blue"; disjoint vocabularies.
    fn separable() -> Vec<EncodedDoc> {
        (0..20)
            .map(|i| match i % 3 {
                0 => doc(i, "red crimson scarlet", vec![0]),
                1 => doc(i, "blue navy azure", vec![1]),
                _ => doc(i, "red crimson blue navy", vec![0, 1]),
            })
            .collect()
    }

    #[test]
    fn zero_weights_emit_every_label_at_half() {
        let m = ModelState::zeros(3, DIM, 0.5);
        let x = crate::corpus::featurize_text("anything", dim());
        assert_eq!(m.predict(&x), vec![0, 1, 2]);
        let m = ModelState::zeros(3, DIM, 0.5 + 1e-9);
        assert!(m.predict(&x).is_empty());
    }

    #[test]
    fn separable_set_is_learned() {
        let docs = separable();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        // small batches so the 20 docs give five updates per epoch
        let opts = TrainOptions { batch_size: 4, learning_rate: 1.0, ..Default::default() };
        let (m, budget) = train(Init::Fresh, &refs, &refs, 2, dim(), &opts, 1).unwrap();
        assert!(m.score(&refs) >= 0.99, "score {}", m.score(&refs));
        // closed-form separability: positive margin for every (doc, label)
        for d in &docs {
            let z = m.logits(&d.features);
            for (l, zl) in z.iter().enumerate() {
                assert_eq!(*zl >= 0.0, d.labels.contains(&l));
            }
        }
        assert!(budget.epochs_run <= 35);
    }

    #[test]
    fn single_example_fit() {
        let docs = [doc(0, "statute", vec![1])];
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let opts = TrainOptions { min_improvement: 0.0, ..Default::default() };
        let (m, _) = train(Init::Fresh, &refs, &refs, 2, dim(), &opts, 0).unwrap();
        let p = m.probabilities(&docs[0].features);
        assert!(p[1] > 0.5);
        assert!(m.predict(&docs[0].features).contains(&1));
    }

    #[test]
    fn deterministic_given_seed() {
        let docs = separable();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let a = train(Init::Fresh, &refs, &refs, 2, dim(), &TrainOptions::default(), 9).unwrap().0;
        let b = train(Init::Fresh, &refs, &refs, 2, dim(), &TrainOptions::default(), 9).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn plateau_stops_early() {
        let docs: Vec<EncodedDoc> = (0..200).map(|i| doc(i, &format!("tok{}", i % 7), vec![i % 2])).collect();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let opts = TrainOptions { learning_rate: 0.0, ..Default::default() };
        let (_, budget) = train(Init::Fresh, &refs, &refs, 2, dim(), &opts, 3).unwrap();
        // 200 docs / 32 = 7 batches, evaluated after batches 2,3,5,6,7. The
        // first evaluation sets the best score; the next five are flat, the
        // last of them after batch 2 of epoch two.
        assert_eq!(budget.epochs_run, 2);
        assert_eq!(budget.examples_seen, 200 + 64);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let docs = separable();
        let batch: Vec<&EncodedDoc> = docs.iter().take(8).collect();
        let m = ModelState::random(2, DIM, 0.5, 4);
        assert!(gradient_check(&m, &batch, 5) < 1e-4);
    }

    #[test]
    fn zero_input_gradient() {
        let d = EncodedDoc { position: 0, features: FeatureVector::zeros(DIM), labels: vec![1] };
        let mut m = ModelState::zeros(2, DIM, 0.5);
        m.bias_mut().copy_from_slice(&[0.3, -0.7]);
        let g = m.gradient(&[&d]);
        assert!(g.weights.is_empty());
        assert_eq!(g.bias, vec![sigmoid(0.3) - 0.0, sigmoid(-0.7) - 1.0]);
    }

    #[test]
    fn duplicate_doubles_contribution() {
        let docs = separable();
        let m = ModelState::random(2, DIM, 0.5, 2);
        let once = m.gradient(&[&docs[0]]);
        let twice = m.gradient(&[&docs[0], &docs[0]]);
        for (a, b) in once.bias.iter().zip(&twice.bias) {
            assert_eq!(2.0 * a, *b);
        }
        for (k, v) in &once.weights {
            assert_eq!(2.0 * v, twice.weights[k]);
        }
    }

    #[test]
    fn rejects_unknown_labels() {
        let docs = [doc(0, "a", vec![5])];
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        assert!(matches!(
            train(Init::Fresh, &refs, &refs, 2, dim(), &TrainOptions::default(), 0),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn diverging_training_reports_nonfinite_loss() {
        let docs = separable();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let mut m = ModelState::zeros(2, DIM, 0.5);
        m.bias_mut()[0] = f64::NAN;
        let err = train(Init::From(&m), &refs, &refs, 2, dim(), &TrainOptions::default(), 0).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn model_file_round_trip_and_label_guard() {
        let docs = separable();
        let refs: Vec<&EncodedDoc> = docs.iter().collect();
        let (m, _) = train(Init::Fresh, &refs, &refs, 2, dim(), &TrainOptions::default(), 1).unwrap();
        let labels = LabelSpace::new(vec!["red".into(), "blue".into()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save_json(&path, &labels).unwrap();
        assert_eq!(ModelState::load_json(&path, &labels).unwrap(), m);
        let other = LabelSpace::new(vec!["blue".into(), "red".into()]).unwrap();
        assert!(matches!(ModelState::load_json(&path, &other), Err(Error::LabelSpaceMismatch { .. })));
    }
}
