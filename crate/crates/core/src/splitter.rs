//! Train/validation/test partitioning: iterative multilabel stratification
//! and chronological ordering.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    Stratified,
    Chronological,
}

impl SplitStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitStrategy::Stratified => "stratified",
            SplitStrategy::Chronological => "chronological",
        }
    }
}

/// Train/validation/test fractions, each in (0,1), summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 0.70, validation: 0.15, test: 0.15 }
    }
}

impl SplitRatio {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let r = SplitRatio { train, validation, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidRatio(format!("each part must lie in (0,1): {self:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatio(format!("parts must sum to 1: {self:?}")));
        }
        Ok(())
    }

    /// Subset sizes for `n` items: train and validation rounded half-to-even,
    /// test takes the remainder. Any empty part is an error.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        let train = (n as f64 * self.train).round_ties_even() as usize;
        let validation = (n as f64 * self.validation).round_ties_even() as usize;
        if train + validation >= n || train == 0 || validation == 0 {
            return Err(Error::DegenerateSplit(format!(
                "{n} documents at {}:{}:{} leave an empty part",
                self.train, self.validation, self.test
            )));
        }
        Ok([train, validation, n - train - validation])
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

/// A train/validation/test partition of document ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub strategy: SplitStrategy,
    pub ratio: SplitRatio,
    pub seed: u64,
    /// 0 for the research-phase split, parent's generation + 1 otherwise.
    pub generation: u32,
    pub parent: Option<Arc<DataSplit>>,
}

/// JSON form of a split, with lineage by generation number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub generation: u32,
    pub parent_generation: Option<u32>,
    pub strategy: SplitStrategy,
    pub ratio: SplitRatio,
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl DataSplit {
    pub(crate) fn from_parts(
        [train, validation, test]: [Vec<String>; 3],
        strategy: SplitStrategy,
        ratio: SplitRatio,
        seed: u64,
        parent: Option<Arc<DataSplit>>,
    ) -> Self {
        let generation = parent.as_ref().map_or(0, |p| p.generation + 1);
        DataSplit { train, validation, test, strategy, ratio, seed, generation, parent }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    /// Checks the subsets are pairwise disjoint and cover `universe` exactly.
    pub fn check_partition<'a>(&self, universe: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.len());
        for id in self.ids() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DegenerateSplit(format!("id {id:?} appears twice")));
            }
        }
        let universe: HashSet<&str> = universe.into_iter().collect();
        if universe != seen {
            return Err(Error::DegenerateSplit(format!(
                "split covers {} ids, universe has {}",
                seen.len(),
                universe.len()
            )));
        }
        Ok(())
    }

    /// Number of parent links back to the root split.
    pub fn lineage_depth(&self) -> usize {
        std::iter::successors(self.parent.as_deref(), |p| p.parent.as_deref()).count()
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            generation: self.generation,
            parent_generation: self.parent.as_ref().map(|p| p.generation),
            strategy: self.strategy,
            ratio: self.ratio,
            seed: self.seed,
            train: self.train.clone(),
            validation: self.validation.clone(),
            test: self.test.clone(),
        }
    }

    pub fn to_manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes")
    }
}

fn ids_of(docs: &[&Document], members: impl IntoIterator<Item = usize>) -> Vec<String> {
    members.into_iter().map(|i| docs[i].id.clone()).collect()
}

/// Sorts by `(timestamp, id)` and cuts at the ratio's sizes.
pub fn chronological_split(docs: &[&Document], ratio: SplitRatio) -> Result<DataSplit> {
    chronological_split_with_parent(docs, ratio, None)
}

pub(crate) fn chronological_split_with_parent(
    docs: &[&Document],
    ratio: SplitRatio,
    parent: Option<Arc<DataSplit>>,
) -> Result<DataSplit> {
    ratio.validate()?;
    if docs.len() < 3 {
        return Err(Error::DegenerateSplit(format!("need at least 3 documents, got {}", docs.len())));
    }
    let [n_train, n_val, _] = ratio.sizes(docs.len())?;
    let mut order: Vec<&Document> = docs.to_vec();
    order.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
    let ids: Vec<String> = order.iter().map(|d| d.id.clone()).collect();
    let test = ids[n_train + n_val..].to_vec();
    let validation = ids[n_train..n_train + n_val].to_vec();
    let mut train = ids;
    train.truncate(n_train);
    Ok(DataSplit::from_parts(
        [train, validation, test],
        SplitStrategy::Chronological,
        ratio,
        0,
        parent,
    ))
}

/// Iterative multilabel stratification into the three ratio subsets.
pub fn iterative_stratified_split(docs: &[&Document], ratio: SplitRatio, seed: u64) -> Result<DataSplit> {
    stratified_split_with_parent(docs, ratio, seed, None)
}

pub(crate) fn stratified_split_with_parent(
    docs: &[&Document],
    ratio: SplitRatio,
    seed: u64,
    parent: Option<Arc<DataSplit>>,
) -> Result<DataSplit> {
    ratio.validate()?;
    if docs.len() < 3 {
        return Err(Error::DegenerateSplit(format!("need at least 3 documents, got {}", docs.len())));
    }
    let sizes = ratio.sizes(docs.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = stratify(docs, &ratio.fractions(), &sizes, &mut rng);
    let mut parts: [Vec<String>; 3] = Default::default();
    for (i, &subset) in assignment.iter().enumerate() {
        parts[subset].push(docs[i].id.clone());
    }
    Ok(DataSplit::from_parts(parts, SplitStrategy::Stratified, ratio, seed, parent))
}

/// Uniformly random split at the ratio's sizes; the baseline stratification
/// is measured against.
pub fn random_split(docs: &[&Document], ratio: SplitRatio, seed: u64) -> Result<DataSplit> {
    ratio.validate()?;
    let [n_train, n_val, _] = ratio.sizes(docs.len())?;
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let parts = [
        ids_of(docs, order[..n_train].iter().copied()),
        ids_of(docs, order[n_train..n_train + n_val].iter().copied()),
        ids_of(docs, order[n_train + n_val..].iter().copied()),
    ];
    Ok(DataSplit::from_parts(parts, SplitStrategy::Stratified, ratio, seed, None))
}

/// Greedy iterative stratification.
///
/// Labels are visited rarest-first (by remaining unassigned documents, ties
/// by label id order). Each unassigned document carrying the label goes to
/// the subset with the largest remaining demand for that label, then the
/// largest remaining size, then a seeded random pick. Only subsets with
/// remaining size are eligible, so the output sizes equal `sizes` exactly.
///
/// A label on more than half the documents also contributes its complement
/// ("does not carry the label") as an extra label; otherwise the few
/// documents without it are used up by rarer labels and the dominant label
/// piles into whichever subset has room left at the end. A final
/// [`rebalance`] pass swaps documents until every well-supported label is
/// within bounds.
///
/// Returns the subset index of every input document.
pub(crate) fn stratify(
    docs: &[&Document],
    fractions: &[f64],
    sizes: &[usize],
    rng: &mut impl Rng,
) -> Vec<usize> {
    debug_assert_eq!(fractions.len(), sizes.len());
    debug_assert_eq!(sizes.iter().sum::<usize>(), docs.len());
    let k = sizes.len();

    // local label numbering in label-id order
    let mut label_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for d in docs {
        for l in &d.labels {
            label_ids.entry(l.as_str()).or_insert(0);
        }
    }
    for (i, v) in label_ids.values_mut().enumerate() {
        *v = i;
    }
    let real_labels = label_ids.len();
    let mut doc_labels: Vec<Vec<usize>> =
        docs.iter().map(|d| d.labels.iter().map(|l| label_ids[l.as_str()]).collect()).collect();
    // A label carried by most documents is balanced through its complement:
    // the documents without it are the scarce ones.
    let mut carried = vec![0usize; real_labels];
    for ls in &doc_labels {
        for &l in ls {
            carried[l] += 1;
        }
    }
    let complemented: Vec<usize> = (0..real_labels).filter(|&l| 2 * carried[l] > docs.len()).collect();
    for ls in doc_labels.iter_mut() {
        for (c, &l) in complemented.iter().enumerate() {
            if !ls.contains(&l) {
                ls.push(real_labels + c);
            }
        }
    }
    let n_labels = real_labels + complemented.len();

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, ls) in doc_labels.iter().enumerate() {
        for &l in ls {
            by_label[l].push(i);
        }
    }
    let mut remaining: Vec<usize> = by_label.iter().map(Vec::len).collect();
    let mut demand: Vec<Vec<f64>> = fractions
        .iter()
        .map(|&f| by_label.iter().map(|ds| f * ds.len() as f64).collect())
        .collect();
    let mut capacity: Vec<usize> = sizes.to_vec();
    let mut assignment = vec![usize::MAX; docs.len()];
    let mut tied: Vec<usize> = Vec::with_capacity(k);

    while let Some(label) = (0..n_labels).filter(|&l| remaining[l] > 0).min_by_key(|&l| (remaining[l], l)) {
        for &d in &by_label[label] {
            if assignment[d] != usize::MAX {
                continue;
            }
            tied.clear();
            let mut best: Option<(f64, usize)> = None;
            for j in (0..k).filter(|&j| capacity[j] > 0) {
                let key = (demand[j][label], capacity[j]);
                match best {
                    Some(b) if key.0 < b.0 || (key.0 == b.0 && key.1 < b.1) => {}
                    Some(b) if key == b => tied.push(j),
                    _ => {
                        best = Some(key);
                        tied.clear();
                        tied.push(j);
                    }
                }
            }
            let subset = if tied.len() == 1 { tied[0] } else { tied[rng.gen_range(0..tied.len())] };
            assignment[d] = subset;
            capacity[subset] -= 1;
            for &l in &doc_labels[d] {
                demand[subset][l] -= 1.0;
                remaining[l] -= 1;
            }
        }
    }

    // unlabeled leftovers
    for a in assignment.iter_mut().filter(|a| **a == usize::MAX) {
        let max_cap = *capacity.iter().max().expect("at least one subset");
        let candidates: Vec<usize> = (0..k).filter(|&j| capacity[j] == max_cap).collect();
        let subset = candidates[rng.gen_range(0..candidates.len())];
        *a = subset;
        capacity[subset] -= 1;
    }
    for ls in doc_labels.iter_mut() {
        ls.retain(|&l| l < real_labels);
    }
    rebalance(&doc_labels, real_labels, sizes, &mut assignment);
    assignment
}

/// Squared-deviation change, the two subsets, and the label sets they trade.
type Swap<'a> = (f64, usize, usize, &'a Vec<usize>, &'a Vec<usize>);

/// Labels carried by fewer documents than this have no balance guarantee.
const BALANCE_MIN_SUPPORT: usize = 50;

/// Swaps documents between subsets while some subset's prevalence of a
/// well-supported label is further from the full set's than
/// `max(2/|subset|, 0.02)`. Each step takes the swap that most reduces the
/// summed squared prevalence deviation over all labels; documents are
/// compared by label set, so a step costs one pass over pairs of distinct
/// label sets. Subset sizes are unchanged.
fn rebalance(doc_labels: &[Vec<usize>], n_labels: usize, sizes: &[usize], assignment: &mut [usize]) {
    let n = assignment.len();
    let k = sizes.len();
    let mut support = vec![0usize; n_labels];
    let mut counts = vec![vec![0.0f64; n_labels]; k];
    let mut groups: Vec<BTreeMap<Vec<usize>, Vec<usize>>> = vec![BTreeMap::new(); k];
    for (d, ls) in doc_labels.iter().enumerate() {
        let j = assignment[d];
        for &l in ls {
            support[l] += 1;
            counts[j][l] += 1.0;
        }
        let mut signature = ls.clone();
        signature.sort_unstable();
        groups[j].entry(signature).or_default().push(d);
    }
    let prevalence: Vec<f64> = support.iter().map(|&c| c as f64 / n as f64).collect();
    let deviation = |counts: &[Vec<f64>], j: usize, l: usize| counts[j][l] / sizes[j] as f64 - prevalence[l];
    let out_of_bounds = |counts: &[Vec<f64>]| {
        (0..k).filter(|&j| sizes[j] > 0).any(|j| {
            let bound = (2.0 / sizes[j] as f64).max(0.02);
            (0..n_labels).any(|l| support[l] >= BALANCE_MIN_SUPPORT && deviation(counts, j, l).abs() > bound)
        })
    };

    for _ in 0..n {
        if !out_of_bounds(&counts) {
            break;
        }
        let mut best: Option<Swap<'_>> = None;
        for a in (0..k).filter(|&j| sizes[j] > 0) {
            for b in (a + 1..k).filter(|&j| sizes[j] > 0) {
                for s in groups[a].keys() {
                    for t in groups[b].keys().filter(|t| *t != s) {
                        // a gives up `s` and takes `t`; b the reverse
                        let mut change = 0.0;
                        let mut step = |l: usize, into_a: f64| {
                            for (j, sign) in [(a, into_a), (b, -into_a)] {
                                let delta = sign / sizes[j] as f64;
                                change += delta * (2.0 * deviation(&counts, j, l) + delta);
                            }
                        };
                        for &l in s.iter().filter(|l| !t.contains(l)) {
                            step(l, -1.0);
                        }
                        for &l in t.iter().filter(|l| !s.contains(l)) {
                            step(l, 1.0);
                        }
                        if change < -1e-12 && best.is_none_or(|x| change < x.0) {
                            best = Some((change, a, b, s, t));
                        }
                    }
                }
            }
        }
        let Some((_, a, b, s, t)) = best else { break };
        let (s, t) = (s.clone(), t.clone());
        let from_a = take(&mut groups[a], &s);
        let from_b = take(&mut groups[b], &t);
        for &l in &s {
            counts[a][l] -= 1.0;
            counts[b][l] += 1.0;
        }
        for &l in &t {
            counts[b][l] -= 1.0;
            counts[a][l] += 1.0;
        }
        assignment[from_a] = b;
        assignment[from_b] = a;
        groups[b].entry(s).or_default().push(from_a);
        groups[a].entry(t).or_default().push(from_b);
    }
}

/// Removes the most recently added document with label set `signature`.
fn take(groups: &mut BTreeMap<Vec<usize>, Vec<usize>>, signature: &[usize]) -> usize {
    let members = groups.get_mut(signature).expect("signature present");
    let d = members.pop().expect("group non-empty");
    if members.is_empty() {
        groups.remove(signature);
    }
    d
}

/// Per-label prevalence of each listed id subset relative to the full set,
/// as mean absolute deviation over labels.
pub fn mean_prevalence_deviation(docs: &[&Document], split: &DataSplit) -> f64 {
    let index: std::collections::HashMap<&str, &Document> =
        docs.iter().map(|d| (d.id.as_str(), *d)).collect();
    let labels: std::collections::BTreeSet<&str> =
        docs.iter().flat_map(|d| d.labels.iter().map(String::as_str)).collect();
    let prevalence = |ids: &mut dyn Iterator<Item = &Document>, label: &str| {
        let (hit, n) = ids.fold((0usize, 0usize), |(h, n), d| (h + d.has_label(label) as usize, n + 1));
        hit as f64 / n as f64
    };
    let mut total = 0.0;
    let mut count = 0;
    for label in &labels {
        let full = prevalence(&mut docs.iter().copied(), label);
        for part in [&split.train, &split.validation, &split.test] {
            let p = prevalence(&mut part.iter().map(|id| index[id.as_str()]), label);
            total += (p - full).abs();
            count += 1;
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2000, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    fn make(n: usize, label_of: impl Fn(usize) -> Vec<&'static str>) -> Vec<Document> {
        (0..n).map(|i| Document::new(format!("d{i:04}"), day(i as i64), "", label_of(i))).collect()
    }

    #[test]
    fn sizes_rounding() {
        let r = SplitRatio::default();
        assert_eq!(r.sizes(10).unwrap(), [7, 2, 1]);
        assert_eq!(r.sizes(100).unwrap(), [70, 15, 15]);
        assert!(r.sizes(3).is_err());
        assert!(SplitRatio::new(0.7, 0.2, 0.2).is_err());
        assert!(SplitRatio::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn chronological_ten() {
        let docs = make(10, |_| vec!["a"]);
        let mut refs: Vec<&Document> = docs.iter().collect();
        refs.reverse();
        let s = chronological_split(&refs, SplitRatio::default()).unwrap();
        assert_eq!(s.train, (0..7).map(|i| format!("d{i:04}")).collect::<Vec<_>>());
        assert_eq!(s.validation, ["d0007", "d0008"]);
        assert_eq!(s.test, ["d0009"]);
    }

    #[test]
    fn chronological_rejects_three() {
        let docs = make(3, |_| vec!["a"]);
        let refs: Vec<&Document> = docs.iter().collect();
        let err = chronological_split(&refs, SplitRatio::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate split"));
        assert!(chronological_split(&refs[..2], SplitRatio::default()).is_err());
    }

    #[test]
    fn chronological_same_date_uses_id_order() {
        let docs: Vec<Document> =
            (0..20).rev().map(|i| Document::new(format!("x{i:02}"), day(0), "", ["a"])).collect();
        let refs: Vec<&Document> = docs.iter().collect();
        let s = chronological_split(&refs, SplitRatio::default()).unwrap();
        assert_eq!(s.train.first().unwrap(), "x00");
        assert_eq!(s.train.last().unwrap(), "x13");
        assert_eq!(s.validation, ["x14", "x15", "x16"]);
        assert_eq!(s.test, ["x17", "x18", "x19"]);
    }

    #[test]
    fn single_label_degenerates_to_sizes() {
        let docs = make(100, |_| vec!["only"]);
        let refs: Vec<&Document> = docs.iter().collect();
        for seed in 0..5 {
            let s = iterative_stratified_split(&refs, SplitRatio::default(), seed).unwrap();
            assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (70, 15, 15));
        }
    }

    #[test]
    fn two_label_prevalence_within_one_document() {
        // 160 carry "a" only, 40 carry "b" only
        let docs = make(200, |i| if i % 5 == 0 { vec!["b"] } else { vec!["a"] });
        let refs: Vec<&Document> = docs.iter().collect();
        let s = iterative_stratified_split(&refs, SplitRatio::default(), 11).unwrap();
        let count = |ids: &[String], l: &str| {
            ids.iter().filter(|id| docs.iter().find(|d| &d.id == *id).unwrap().has_label(l)).count()
        };
        for (ids, size) in [(&s.train, 140.0), (&s.validation, 30.0), (&s.test, 30.0)] {
            let b = count(ids, "b") as f64;
            let a = count(ids, "a") as f64;
            assert!((b - 0.2 * size).abs() <= 1.0, "b={b} size={size}");
            assert!((a - 0.8 * size).abs() <= 1.0, "a={a} size={size}");
        }
    }

    #[test]
    fn dominant_label_stays_balanced() {
        // "a" is on 80% of documents and rides along with the rarer labels,
        // so the documents without it must be spread deliberately
        let docs = make(160, |i| match i % 10 {
            0 => vec!["a", "b"],
            1 => vec!["a", "c"],
            2 => vec!["c"],
            9 => vec!["b"],
            _ => vec!["a"],
        });
        let refs: Vec<&Document> = docs.iter().collect();
        for seed in 0..20 {
            let split = iterative_stratified_split(&refs, SplitRatio::default(), seed).unwrap();
            for part in [&split.train, &split.validation, &split.test] {
                let bound = (2.0 / part.len() as f64).max(0.02);
                for (label, full) in [("a", 0.8), ("b", 0.2), ("c", 0.2)] {
                    let carried = part
                        .iter()
                        .filter(|id| docs.iter().any(|d| &d.id == *id && d.has_label(label)))
                        .count();
                    let deviation = (carried as f64 / part.len() as f64 - full).abs();
                    assert!(deviation <= bound, "seed {seed} label {label}: {deviation} > {bound}");
                }
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let docs = make(300, |i| match i % 7 {
            0 => vec!["a", "b"],
            1 | 2 => vec!["b"],
            3 => vec!["c", "a"],
            _ => vec!["a"],
        });
        let refs: Vec<&Document> = docs.iter().collect();
        let a = iterative_stratified_split(&refs, SplitRatio::default(), 5).unwrap();
        let b = iterative_stratified_split(&refs, SplitRatio::default(), 5).unwrap();
        assert_eq!(a, b);
        a.check_partition(docs.iter().map(|d| d.id.as_str())).unwrap();
    }

    #[test]
    fn manifest_lineage() {
        let docs = make(10, |_| vec!["a"]);
        let refs: Vec<&Document> = docs.iter().collect();
        let root = Arc::new(chronological_split(&refs, SplitRatio::default()).unwrap());
        let child = chronological_split_with_parent(&refs, SplitRatio::default(), Some(root)).unwrap();
        assert_eq!(child.generation, 1);
        assert_eq!(child.lineage_depth(), 1);
        let m: SplitManifest = serde_json::from_str(&child.to_manifest_json()).unwrap();
        assert_eq!(m.parent_generation, Some(0));
        assert_eq!(m.train.len(), 7);
    }
}
