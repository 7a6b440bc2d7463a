//! New-data inclusion workflows: turn newly acquired documents plus the
//! previous split into the next retraining split.
//!
//! | workflow | split         | old data carried over                                   |
//! |----------|---------------|----------------------------------------------------------|
//! | 1        | stratified    | none                                                     |
//! | 2        | stratified    | prev validation -> train; prev test -> x to validation, 1-x to test |
//! | 3        | chronological | none                                                     |
//! | 4        | chronological | prev validation and prev test -> train                   |
//!
//! Previous training documents are never carried over by any workflow.
//! Workflow 2 therefore drops them even though its aim is to keep every
//! data point in play; cumulative and checkpoint finetuning re-read them on
//! the trainer side instead.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, DocumentSource};
use crate::error::{Error, Result};
use crate::splitter::{
    chronological_split_with_parent, stratified_split_with_parent, stratify, DataSplit, SplitRatio,
    SplitStrategy,
};

/// Default share of the previous test set moved into validation.
pub const DEFAULT_CARRY_FRACTION: f64 = 0.5;

const CARRY_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inclusion {
    NewOnly,
    NewPlusOld,
    /// Allocation as `NewOnly`; the trainer unions all historical train sets.
    NewPlusAllOld,
}

impl Inclusion {
    pub fn as_str(self) -> &'static str {
        match self {
            Inclusion::NewOnly => "new_only",
            Inclusion::NewPlusOld => "new_plus_old",
            Inclusion::NewPlusAllOld => "new_plus_all_old",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workflow {
    StratifiedNewOnly,
    StratifiedCombined,
    ChronologicalNewOnly,
    ChronologicalCombined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    pub split_strategy: SplitStrategy,
    pub inclusion: Inclusion,
    /// Share of the previous test set moved into validation (workflow 2 only).
    pub x: f64,
}

impl AllocationPolicy {
    pub fn new(split_strategy: SplitStrategy, inclusion: Inclusion, x: f64) -> Result<Self> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidConfig(format!("x must lie in (0,1), got {x}")));
        }
        Ok(AllocationPolicy { split_strategy, inclusion, x })
    }

    pub fn workflow(&self) -> Workflow {
        match (self.split_strategy, self.inclusion) {
            (SplitStrategy::Stratified, Inclusion::NewPlusOld) => Workflow::StratifiedCombined,
            (SplitStrategy::Stratified, _) => Workflow::StratifiedNewOnly,
            (SplitStrategy::Chronological, Inclusion::NewPlusOld) => Workflow::ChronologicalCombined,
            (SplitStrategy::Chronological, _) => Workflow::ChronologicalNewOnly,
        }
    }

    /// Builds the next split under this policy.
    pub fn allocate(
        &self,
        new_docs: &[&Document],
        prev: &Arc<DataSplit>,
        source: &dyn DocumentSource,
        ratio: SplitRatio,
        seed: u64,
    ) -> Result<DataSplit> {
        match self.workflow() {
            Workflow::StratifiedNewOnly => allocate_stratified_new_only(new_docs, prev, ratio, seed),
            Workflow::StratifiedCombined => {
                allocate_stratified_combined(new_docs, prev, source, ratio, self.x, seed)
            }
            Workflow::ChronologicalNewOnly => allocate_chrono_new_only(new_docs, prev, ratio),
            Workflow::ChronologicalCombined => allocate_chrono_combined(new_docs, prev, ratio),
        }
    }
}

/// Workflow 1: stratified split of the new documents only.
pub fn allocate_stratified_new_only(
    new_docs: &[&Document],
    prev: &Arc<DataSplit>,
    ratio: SplitRatio,
    seed: u64,
) -> Result<DataSplit> {
    stratified_split_with_parent(new_docs, ratio, seed, Some(Arc::clone(prev)))
}

/// Workflow 2: stratified split of the new documents; previous validation
/// joins train, previous test is stratified into an `x` part (to validation)
/// and a `1 - x` part (to test). On odd counts the larger part goes to
/// validation when `x = 0.5`.
///
/// The previous test set is split cohort by cohort, a cohort being the ids
/// that entered the test set in the same generation. Each cohort therefore
/// keeps `1 - x` of its members per round (up to rounding), and after `k`
/// rounds `(1 - x)^k` of the research-phase test set remains.
pub fn allocate_stratified_combined(
    new_docs: &[&Document],
    prev: &Arc<DataSplit>,
    source: &dyn DocumentSource,
    ratio: SplitRatio,
    x: f64,
    seed: u64,
) -> Result<DataSplit> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidConfig(format!("x must lie in (0,1), got {x}")));
    }
    if prev.test.is_empty() {
        return Err(Error::DegenerateSplit("previous test set is empty".into()));
    }
    let mut split = stratified_split_with_parent(new_docs, ratio, seed, Some(Arc::clone(prev)))?;
    let prev_test = resolve(source, &prev.test)?;
    let cohorts = test_cohorts(prev);
    let mut to_validation = vec![false; prev_test.len()];
    for cohort in cohorts.iter().copied().collect::<BTreeSet<u32>>() {
        let members: Vec<usize> = (0..prev_test.len()).filter(|&i| cohorts[i] == cohort).collect();
        let docs: Vec<&Document> = members.iter().map(|&i| prev_test[i]).collect();
        let carried = carry_partition(&docs, x, seed ^ CARRY_SEED_SALT ^ u64::from(cohort));
        for (&i, part) in members.iter().zip(carried) {
            to_validation[i] = part;
        }
    }
    split.train.extend(prev.validation.iter().cloned());
    for (doc, to_validation) in prev_test.iter().zip(to_validation) {
        if to_validation {
            split.validation.push(doc.id.clone());
        } else {
            split.test.push(doc.id.clone());
        }
    }
    Ok(split)
}

/// For each id in `split.test`, the generation since which it has been in
/// the test set without interruption.
fn test_cohorts(split: &DataSplit) -> Vec<u32> {
    let mut ancestors = Vec::new();
    let mut cur = split.parent.as_deref();
    while let Some(s) = cur {
        ancestors.push((s.generation, s.test.iter().map(String::as_str).collect::<HashSet<&str>>()));
        cur = s.parent.as_deref();
    }
    split
        .test
        .iter()
        .map(|id| {
            let mut cohort = split.generation;
            for (generation, test) in &ancestors {
                if !test.contains(id.as_str()) {
                    break;
                }
                cohort = *generation;
            }
            cohort
        })
        .collect()
}

/// Two-subset stratification of `docs` into `x` and `1 - x`; `true` marks
/// the `x` part.
fn carry_partition(docs: &[&Document], x: f64, seed: u64) -> Vec<bool> {
    let n = docs.len();
    let first = ((n as f64 * x).round() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stratify(docs, &[x, 1.0 - x], &[first, n - first], &mut rng)
        .into_iter()
        .map(|s| s == 0)
        .collect()
}

/// Workflow 3: chronological split of the new documents only.
pub fn allocate_chrono_new_only(
    new_docs: &[&Document],
    prev: &Arc<DataSplit>,
    ratio: SplitRatio,
) -> Result<DataSplit> {
    chronological_split_with_parent(new_docs, ratio, Some(Arc::clone(prev)))
}

/// Workflow 4: chronological split of the new documents; previous
/// validation and test both join train.
pub fn allocate_chrono_combined(
    new_docs: &[&Document],
    prev: &Arc<DataSplit>,
    ratio: SplitRatio,
) -> Result<DataSplit> {
    if prev.is_empty() {
        return Err(Error::DegenerateSplit("previous split is empty".into()));
    }
    let mut split = chronological_split_with_parent(new_docs, ratio, Some(Arc::clone(prev)))?;
    split.train.extend(prev.validation.iter().cloned());
    split.train.extend(prev.test.iter().cloned());
    Ok(split)
}

fn resolve<'a>(source: &'a dyn DocumentSource, ids: &[String]) -> Result<Vec<&'a Document>> {
    ids.iter()
        .map(|id| {
            source
                .document(id)
                .ok_or_else(|| Error::InvalidConfig(format!("document {id:?} not found")))
        })
        .collect()
}
