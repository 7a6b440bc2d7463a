mod common;

use std::collections::HashSet;
use std::sync::Arc;

use chrono::Days;
use common::{brute_force_weighted_f1, date, random_corpus, random_multilabel};
use ctsim::allocation::{AllocationPolicy, Inclusion};
use ctsim::corpus::{featurize_text, FeatureDim};
use ctsim::metrics::evaluate_indices;
use ctsim::monitor::{compute_threshold, count_triggers_by_scan, Decision, MonitorConfig, MonitorState};
use ctsim::splitter::{chronological_split, iterative_stratified_split, DataSplit, SplitRatio, SplitStrategy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ids(v: &[String]) -> HashSet<&str> {
    v.iter().map(String::as_str).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn splitters_partition_their_input(seed in any::<u64>(), n in 20usize..250, labels in 2usize..10) {
        let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), n, labels);
        let docs: Vec<_> = corpus.documents().iter().collect();
        let ratio = SplitRatio::default();
        let sizes = ratio.sizes(n).unwrap();
        for split in [iterative_stratified_split(&docs, ratio, seed).unwrap(), chronological_split(&docs, ratio).unwrap()] {
            split.check_partition(docs.iter().map(|d| d.id.as_str())).unwrap();
            prop_assert_eq!([split.train.len(), split.validation.len(), split.test.len()], sizes);
        }
    }

    #[test]
    fn chronological_split_respects_time(seed in any::<u64>(), n in 20usize..250) {
        let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), n, 4);
        let docs: Vec<_> = corpus.documents().iter().collect();
        let split = chronological_split(&docs, SplitRatio::default()).unwrap();
        let key = |id: &String| { let d = docs.iter().find(|d| &d.id == id).unwrap(); (d.timestamp, d.id.clone()) };
        let max_train = split.train.iter().map(key).max().unwrap();
        let min_val = split.validation.iter().map(key).min().unwrap();
        let max_val = split.validation.iter().map(key).max().unwrap();
        let min_test = split.test.iter().map(key).min().unwrap();
        prop_assert!(max_train < min_val && max_val < min_test);
    }

    #[test]
    fn weighted_f1_matches_brute_force(seed in any::<u64>(), n in 1usize..60, labels in 1usize..12) {
        let (pred, gold) = random_multilabel(&mut ChaCha8Rng::seed_from_u64(seed), n, labels);
        let fast = evaluate_indices(&pred, &gold, labels).unwrap().weighted_f1;
        prop_assert!((fast - brute_force_weighted_f1(&pred, &gold, labels)).abs() <= 1e-12);
    }

    #[test]
    fn featurization_is_pure_and_normalized(words in proptest::collection::vec("[a-zA-Z0-9]{1,8}", 0..30)) {
        let dim = FeatureDim::new(1 << 10).unwrap();
        let text = words.join(" ");
        let a = featurize_text(&text, dim);
        prop_assert_eq!(&a, &featurize_text(&text, dim));
        let mut reversed = words.clone();
        reversed.reverse();
        prop_assert_eq!(&a, &featurize_text(&reversed.join(",  "), dim));
        let norm: f64 = a.values().iter().map(|v| v * v).sum();
        if words.is_empty() {
            prop_assert!(a.is_zero());
        } else {
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn adjacent_slices_tile(seed in any::<u64>(), a in 0u64..800, b in 0u64..800, c in 0u64..800) {
        let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), 150, 3);
        let mut cuts = [a, b, c];
        cuts.sort_unstable();
        prop_assume!(cuts[0] < cuts[1] && cuts[1] < cuts[2]);
        let day = |k: u64| date("2018-12-01") + Days::new(k);
        let left = corpus.range_by_date(day(cuts[0]), day(cuts[1])).unwrap();
        let right = corpus.range_by_date(day(cuts[1]), day(cuts[2])).unwrap();
        let whole = corpus.range_by_date(day(cuts[0]), day(cuts[2])).unwrap();
        prop_assert_eq!(left.start, whole.start);
        prop_assert_eq!(left.end, right.start);
        prop_assert_eq!(right.end, whole.end);
        let by_scan = corpus.documents().iter().filter(|d| d.timestamp >= day(cuts[0]) && d.timestamp < day(cuts[2])).count();
        prop_assert_eq!(whole.len(), by_scan);
    }

    #[test]
    fn monitor_agrees_with_scan(seed in any::<u64>(), len in 0usize..80) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: Vec<Option<f64>> = (0..len)
            .map(|_| (!rng.gen_bool(0.1)).then(|| [0.70, 0.75, 0.76, 0.80][rng.gen_range(0..4)]))
            .collect();
        let cfg = MonitorConfig::default();
        let mut state = MonitorState::new(0.80, date("2020-01-01"));
        let mut triggers = 0;
        for (k, s) in scores.iter().enumerate() {
            let week = date("2020-01-05") + Days::new(7 * k as u64);
            if state.observe(&cfg, week, 1, *s).unwrap() == Decision::TriggerRetraining {
                triggers += 1;
            }
        }
        prop_assert_eq!(triggers, count_triggers_by_scan(&scores, compute_threshold(0.80, 0.05).unwrap(), 4));
    }
}

/// Five rounds of allocation over consecutive two-month batches.
fn lineage(seed: u64, strategy: SplitStrategy, inclusion: Inclusion) -> Vec<(Vec<String>, Arc<DataSplit>)> {
    let corpus = random_corpus(&mut ChaCha8Rng::seed_from_u64(seed), 600, 6);
    let research: Vec<_> = corpus.slice_by_date(date("2019-01-01"), date("2019-07-01")).unwrap().iter().collect();
    let ratio = SplitRatio::default();
    let first = match strategy {
        SplitStrategy::Stratified => iterative_stratified_split(&research, ratio, seed).unwrap(),
        SplitStrategy::Chronological => chronological_split(&research, ratio).unwrap(),
    };
    let policy = AllocationPolicy::new(strategy, inclusion, 0.5).unwrap();
    let mut out = Vec::new();
    let mut prev = Arc::new(first);
    let mut from = date("2019-07-01");
    for k in 0..5u64 {
        let to = from.checked_add_months(chrono::Months::new(2)).unwrap();
        let new_docs: Vec<_> = corpus.slice_by_date(from, to).unwrap().iter().collect();
        let split = Arc::new(policy.allocate(&new_docs, &prev, &corpus, ratio, seed + k).unwrap());
        let mut universe: Vec<String> = new_docs.iter().map(|d| d.id.clone()).collect();
        if inclusion == Inclusion::NewPlusOld {
            universe.extend(prev.validation.iter().cloned());
            universe.extend(prev.test.iter().cloned());
        }
        out.push((universe, Arc::clone(&split)));
        prev = split;
        from = to;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn allocation_lineages_stay_partitions(seed in any::<u64>()) {
        for strategy in [SplitStrategy::Stratified, SplitStrategy::Chronological] {
            for inclusion in [Inclusion::NewOnly, Inclusion::NewPlusOld] {
                for (k, (universe, split)) in lineage(seed, strategy, inclusion).iter().enumerate() {
                    split.check_partition(universe.iter().map(String::as_str)).unwrap();
                    prop_assert_eq!(split.lineage_depth(), k + 1);
                    let (tr, va, te) = (ids(&split.train), ids(&split.validation), ids(&split.test));
                    prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
                }
            }
        }
    }
}
