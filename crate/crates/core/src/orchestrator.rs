//! Scenario execution: research split, champion training, weekly
//! monitoring, retraining and champion/challenger promotion.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationPolicy, Inclusion, DEFAULT_CARRY_FRACTION};
use crate::corpus::{Corpus, Document, DocumentSource, EncodedDoc};
use crate::error::{Error, Result};
use crate::monitor::{monitor_step, Decision, MonitorConfig, MonitorRecord, MonitorState, ScheduleKind};
use crate::splitter::{chronological_split, iterative_stratified_split, DataSplit, SplitRatio, SplitStrategy};
use crate::trainer::{FinetuneMode, Learner, TrainingBudget};

/// One cell of the strategy matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Row number in the strategy matrix; orders reports.
    pub number: u32,
    pub split_strategy: SplitStrategy,
    pub finetune_mode: FinetuneMode,
    pub inclusion: Inclusion,
    pub schedule: ScheduleKind,
    pub research_cutoff: NaiveDate,
    pub monitoring_end: NaiveDate,
    pub seed: u64,
    pub x: f64,
    pub ratio: SplitRatio,
    pub monitor: MonitorConfig,
}

/// The twelve strategy rows: (split, finetuning, inclusion, schedule).
pub const TABLE: [(SplitStrategy, FinetuneMode, Inclusion, ScheduleKind); 12] = {
    use FinetuneMode::*;
    use Inclusion::*;
    use ScheduleKind::*;
    use SplitStrategy::*;
    [
        (Stratified, Incremental, NewOnly, Threshold),
        (Stratified, Incremental, NewOnly, FixedInterval),
        (Stratified, Incremental, NewPlusOld, Threshold),
        (Stratified, Incremental, NewPlusOld, FixedInterval),
        (Stratified, Cumulative, NewPlusAllOld, FixedInterval),
        (Stratified, Checkpoint, NewPlusAllOld, FixedInterval),
        (Chronological, Incremental, NewOnly, Threshold),
        (Chronological, Incremental, NewOnly, FixedInterval),
        (Chronological, Incremental, NewPlusOld, Threshold),
        (Chronological, Incremental, NewPlusOld, FixedInterval),
        (Chronological, Cumulative, NewPlusAllOld, FixedInterval),
        (Chronological, Checkpoint, NewPlusAllOld, FixedInterval),
    ]
};

/// Settings shared by every scenario of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub research_cutoff: NaiveDate,
    pub monitoring_end: NaiveDate,
    pub seed: u64,
    pub x: f64,
    pub ratio: SplitRatio,
    pub monitor: MonitorConfig,
}

impl RunSettings {
    pub fn new(research_cutoff: NaiveDate, monitoring_end: NaiveDate, seed: u64) -> Self {
        RunSettings {
            research_cutoff,
            monitoring_end,
            seed,
            x: DEFAULT_CARRY_FRACTION,
            ratio: SplitRatio::default(),
            monitor: MonitorConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Scenario for matrix row `number` (1-based).
    pub fn table_row(number: u32, settings: &RunSettings) -> Result<Self> {
        let &(split_strategy, finetune_mode, inclusion, schedule) = TABLE
            .get((number as usize).wrapping_sub(1))
            .ok_or_else(|| Error::InvalidConfig(format!("scenario number {number} outside 1..=12")))?;
        Ok(ScenarioConfig {
            number,
            split_strategy,
            finetune_mode,
            inclusion,
            schedule,
            research_cutoff: settings.research_cutoff,
            monitoring_end: settings.monitoring_end,
            seed: settings.seed,
            x: settings.x,
            ratio: settings.ratio,
            monitor: settings.monitor,
        })
    }

    pub fn table(settings: &RunSettings) -> Vec<Self> {
        (1..=12).map(|n| Self::table_row(n, settings).expect("row in range")).collect()
    }

    /// Matrix row matching this tuple, if any.
    pub fn table_number(&self) -> Option<u32> {
        TABLE
            .iter()
            .position(|&t| t == (self.split_strategy, self.finetune_mode, self.inclusion, self.schedule))
            .map(|i| i as u32 + 1)
    }

    pub fn validate(&self, free_composition: bool) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("scenario {}: {m}", self.number)));
        if self.inclusion == Inclusion::NewPlusAllOld && self.finetune_mode == FinetuneMode::Incremental {
            return bad("new_plus_all_old requires cumulative or checkpoint finetuning".into());
        }
        if self.finetune_mode.uses_history() && self.inclusion != Inclusion::NewPlusAllOld {
            return bad("cumulative and checkpoint finetuning read all old data (new_plus_all_old)".into());
        }
        if !free_composition && self.table_number().is_none() {
            return bad("tuple is not one of the twelve matrix rows".into());
        }
        if self.research_cutoff >= self.monitoring_end {
            return bad("research_cutoff must precede monitoring_end".into());
        }
        self.ratio.validate()?;
        self.monitor.validate()?;
        AllocationPolicy::new(self.split_strategy, self.inclusion, self.x)?;
        Ok(())
    }

    fn monitor_config(&self) -> MonitorConfig {
        MonitorConfig { schedule_kind: self.schedule, ..self.monitor }
    }
}

/// Counters kept by [`TrackedCorpus`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessAudit {
    pub reads: usize,
    /// Documents read whose timestamp was not before the simulated date.
    pub future_reads: usize,
    /// Documents shared between a comparison test set and any model's
    /// training data, or between a training set and its validation/test sets.
    pub leakage: usize,
}

/// Corpus handle that only serves documents dated before the simulated
/// present, and counts any attempt to read past it.
pub struct TrackedCorpus<'a> {
    corpus: &'a Corpus,
    now: Cell<NaiveDate>,
    reads: Cell<usize>,
    future_reads: Cell<usize>,
}

impl<'a> TrackedCorpus<'a> {
    pub fn new(corpus: &'a Corpus, now: NaiveDate) -> Self {
        TrackedCorpus { corpus, now: Cell::new(now), reads: Cell::new(0), future_reads: Cell::new(0) }
    }

    pub fn now(&self) -> NaiveDate {
        self.now.get()
    }

    pub fn advance_to(&self, now: NaiveDate) {
        self.now.set(now);
    }

    fn note(&self, doc: &Document) {
        self.reads.set(self.reads.get() + 1);
        if doc.timestamp >= self.now.get() {
            self.future_reads.set(self.future_reads.get() + 1);
        }
    }

    /// Positions of documents with `from <= timestamp < to`.
    pub fn slice(&self, from: NaiveDate, to: NaiveDate) -> Result<std::ops::Range<usize>> {
        let range = self.corpus.range_by_date(from, to)?;
        for d in &self.corpus.documents()[range.clone()] {
            self.note(d);
        }
        Ok(range)
    }

    pub fn documents(&self, range: std::ops::Range<usize>) -> Vec<&'a Document> {
        self.corpus.documents()[range].iter().collect()
    }

    pub fn audit(&self) -> AccessAudit {
        AccessAudit { reads: self.reads.get(), future_reads: self.future_reads.get(), leakage: 0 }
    }
}

impl DocumentSource for TrackedCorpus<'_> {
    fn document(&self, id: &str) -> Option<&Document> {
        let d = self.corpus.document(id)?;
        self.note(d);
        Some(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerReason {
    Threshold,
    FixedInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainingEvent {
    pub trigger_date: NaiveDate,
    pub trigger_reason: TriggerReason,
    pub executed: bool,
    pub skip_reason: Option<String>,
    pub new_documents: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub challenger_score: Option<f64>,
    pub champion_score: Option<f64>,
    pub promoted: bool,
    pub budget: TrainingBudget,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: ScenarioConfig,
    pub research_test_score: f64,
    pub champion_budget: TrainingBudget,
    pub weekly: Vec<MonitorRecord>,
    pub retraining_events: Vec<RetrainingEvent>,
    pub avg_monitoring_performance: f64,
    pub total_retraining_time: Duration,
    pub total_retraining_examples: usize,
    pub retraining_count: usize,
    /// Research split first, then one split per executed retraining.
    pub splits: Vec<Arc<DataSplit>>,
    pub audit: AccessAudit,
}

/// Mean of the non-empty weekly window scores; 0 when there are none.
pub fn average_score(weekly: &[MonitorRecord]) -> f64 {
    let scores: Vec<f64> = weekly.iter().filter_map(|r| r.window_score).collect();
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Corpus, its encoded documents and the learner used for every scenario.
///
/// The research phase depends only on the split strategy, ratio, cutoff and
/// seed, so its split and champion are computed once per key and shared by
/// every scenario that matches.
pub struct Simulator<'a, L: Learner> {
    corpus: &'a Corpus,
    encoded: &'a [EncodedDoc],
    learner: &'a L,
    research: Mutex<HashMap<ResearchKey, Arc<ResearchPhase<L::Model>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ResearchKey {
    strategy: SplitStrategy,
    ratio: [u64; 3],
    cutoff: NaiveDate,
    seed: u64,
}

struct ResearchPhase<M> {
    split: Arc<DataSplit>,
    train: Vec<usize>,
    model: M,
    budget: TrainingBudget,
    test_score: f64,
}

struct Deployed<M> {
    model: M,
    /// Every corpus position the model's weights have been trained on.
    trained_on: Arc<Vec<bool>>,
}

impl<'a, L: Learner> Simulator<'a, L> {
    pub fn new(corpus: &'a Corpus, encoded: &'a [EncodedDoc], learner: &'a L) -> Result<Self> {
        if encoded.len() != corpus.len() {
            return Err(Error::InvalidConfig("encoded documents do not match corpus".into()));
        }
        Ok(Simulator { corpus, encoded, learner, research: Mutex::new(HashMap::new()) })
    }

    fn positions(&self, ids: &[String]) -> Vec<usize> {
        ids.iter().map(|id| self.corpus.position(id).expect("split ids come from the corpus")).collect()
    }

    fn refs(&self, positions: &[usize]) -> Vec<&'a EncodedDoc> {
        positions.iter().map(|&p| &self.encoded[p]).collect()
    }

    /// Runs one scenario end to end.
    pub fn run_scenario(&self, cfg: &ScenarioConfig) -> Result<RunReport> {
        self.run(cfg, true)
    }

    /// Runs the research phase and monitoring with retraining disabled.
    pub fn run_static(&self, cfg: &ScenarioConfig) -> Result<RunReport> {
        self.run(cfg, false)
    }

    fn run(&self, cfg: &ScenarioConfig, retrain: bool) -> Result<RunReport> {
        cfg.validate(true)?;
        let (corpus_start, _) = self
            .corpus
            .date_range()
            .ok_or_else(|| Error::InvalidConfig("empty corpus".into()))?;
        if cfg.research_cutoff <= corpus_start {
            return Err(Error::InvalidConfig("research_cutoff precedes every document".into()));
        }
        let monitor_cfg = cfg.monitor_config();
        let policy = AllocationPolicy::new(cfg.split_strategy, cfg.inclusion, cfg.x)?;
        let view = TrackedCorpus::new(self.corpus, cfg.research_cutoff);
        let mut leakage = 0usize;

        // research phase
        let research = view.documents(view.slice(corpus_start, cfg.research_cutoff)?);
        let phase = self.research_phase(cfg, &research)?;
        let split = Arc::clone(&phase.split);
        let research_test_score = phase.test_score;
        let champion_budget = phase.budget;
        let mut history_train = phase.train.clone();
        let mut champion = Deployed { trained_on: Arc::new(self.mark(&phase.train)), model: phase.model.clone() };

        let mut state = MonitorState::new(research_test_score, cfg.research_cutoff);
        let mut events = Vec::new();
        let mut splits = vec![Arc::clone(&split)];
        let mut prev_split = split;
        let mut data_cutoff = cfg.research_cutoff;
        let window = chrono::Duration::weeks(i64::from(monitor_cfg.window_weeks));
        let cadence = chrono::Duration::weeks(i64::from(monitor_cfg.cadence_weeks));

        let mut week_end = cfg.research_cutoff + cadence;
        while week_end <= cfg.monitoring_end {
            view.advance_to(week_end);
            let window_pos: Vec<usize> = view.slice(week_end - window, week_end)?.collect();
            let decision = monitor_step(
                &mut state,
                &monitor_cfg,
                week_end,
                &self.refs(&window_pos),
                self.learner,
                &champion.model,
                corpus_start,
            )?;
            if retrain && decision == Decision::TriggerRetraining && week_end < cfg.monitoring_end {
                let reason = match cfg.schedule {
                    ScheduleKind::Threshold => TriggerReason::Threshold,
                    ScheduleKind::FixedInterval => TriggerReason::FixedInterval,
                };
                let mut event = RetrainingEvent {
                    trigger_date: week_end,
                    trigger_reason: reason,
                    executed: false,
                    skip_reason: None,
                    new_documents: 0,
                    train_size: 0,
                    validation_size: 0,
                    test_size: 0,
                    challenger_score: None,
                    champion_score: None,
                    promoted: false,
                    budget: TrainingBudget::default(),
                };
                let new_docs = view.documents(view.slice(data_cutoff, week_end)?);
                event.new_documents = new_docs.len();
                if new_docs.is_empty() {
                    event.skip_reason = Some("no new documents".into());
                    events.push(event);
                    // restart the calendar so a fixed schedule waits a full interval
                    state.last_retrain = week_end;
                    week_end += cadence;
                    continue;
                }
                let k = splits.len() as u64;
                let next = match policy.allocate(&new_docs, &prev_split, &view, cfg.ratio, mix(cfg.seed, 1000 + k)) {
                    Ok(s) => Arc::new(s),
                    Err(e) => {
                        event.skip_reason = Some(e.to_string());
                        events.push(event);
                        state.last_retrain = week_end;
                        week_end += cadence;
                        continue;
                    }
                };
                let split_train = self.positions(&next.train);
                let val_pos = self.positions(&next.validation);
                let test_pos = self.positions(&next.test);
                let train_pos: Vec<usize> = if cfg.finetune_mode.uses_history() {
                    let mut all = history_train.clone();
                    all.extend(&split_train);
                    all
                } else {
                    split_train.clone()
                };

                let init = cfg.finetune_mode.warm_start().then_some(&champion.model);
                let (model, budget) =
                    self.learner.fit(init, &self.refs(&train_pos), &self.refs(&val_pos), mix(cfg.seed, k))?;
                let mut trained_on = if cfg.finetune_mode.warm_start() {
                    (*champion.trained_on).clone()
                } else {
                    vec![false; self.corpus.len()]
                };
                for &p in &train_pos {
                    trained_on[p] = true;
                }

                leakage += overlap(&train_pos, &val_pos) + overlap(&train_pos, &test_pos);
                leakage += test_pos.iter().filter(|&&p| trained_on[p] || champion.trained_on[p]).count();

                let test_refs = self.refs(&test_pos);
                let challenger_score = self.learner.score(&model, &test_refs);
                let champion_score = self.learner.score(&champion.model, &test_refs);
                let promoted = challenger_score >= champion_score;
                event.executed = true;
                event.train_size = train_pos.len();
                event.validation_size = val_pos.len();
                event.test_size = test_pos.len();
                event.challenger_score = Some(challenger_score);
                event.champion_score = Some(champion_score);
                event.promoted = promoted;
                event.budget = budget;
                events.push(event);

                if promoted {
                    champion = Deployed { model, trained_on: Arc::new(trained_on) };
                }
                state.reset(if promoted { challenger_score } else { champion_score }, week_end);
                history_train.extend(split_train);
                data_cutoff = week_end;
                splits.push(Arc::clone(&next));
                prev_split = next;
            }
            week_end += cadence;
        }

        let executed: Vec<&RetrainingEvent> = events.iter().filter(|e| e.executed).collect();
        let mut audit = view.audit();
        audit.leakage = leakage;
        Ok(RunReport {
            scenario: cfg.clone(),
            research_test_score,
            champion_budget,
            avg_monitoring_performance: average_score(&state.history),
            total_retraining_time: executed.iter().map(|e| e.budget.wall_clock).sum(),
            total_retraining_examples: executed.iter().map(|e| e.budget.examples_seen).sum(),
            retraining_count: executed.len(),
            weekly: state.history,
            retraining_events: events,
            splits,
            audit,
        })
    }

    fn research_phase(&self, cfg: &ScenarioConfig, research: &[&Document]) -> Result<Arc<ResearchPhase<L::Model>>> {
        let key = ResearchKey {
            strategy: cfg.split_strategy,
            ratio: cfg.ratio.fractions().map(f64::to_bits),
            cutoff: cfg.research_cutoff,
            seed: cfg.seed,
        };
        if let Some(hit) = self.research.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let split = match cfg.split_strategy {
            SplitStrategy::Stratified => iterative_stratified_split(research, cfg.ratio, cfg.seed)?,
            SplitStrategy::Chronological => chronological_split(research, cfg.ratio)?,
        };
        let train = self.positions(&split.train);
        let val = self.positions(&split.validation);
        let test = self.positions(&split.test);
        let (model, budget) = self.learner.fit(None, &self.refs(&train), &self.refs(&val), mix(cfg.seed, 0))?;
        let test_score = self.learner.score(&model, &self.refs(&test));
        let phase = Arc::new(ResearchPhase { split: Arc::new(split), train, model, budget, test_score });
        self.research.lock().expect("cache lock").insert(key, Arc::clone(&phase));
        Ok(phase)
    }

    fn mark(&self, positions: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.corpus.len()];
        for &p in positions {
            m[p] = true;
        }
        m
    }

    /// Runs scenarios independently on up to `workers` threads. Results come
    /// back sorted by scenario number; one failure does not stop the others.
    pub fn run_matrix(&self, scenarios: &[ScenarioConfig], workers: usize) -> Vec<(ScenarioConfig, Result<RunReport>)>
    where
        L::Model: Send,
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build();
        let run_all = || -> Vec<(ScenarioConfig, Result<RunReport>)> {
            scenarios.par_iter().map(|cfg| (cfg.clone(), self.run_scenario(cfg))).collect()
        };
        let mut out = match pool {
            Ok(pool) => pool.install(run_all),
            Err(_) => run_all(),
        };
        out.sort_by_key(|(cfg, _)| cfg.number);
        out
    }
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    let set: HashSet<usize> = a.iter().copied().collect();
    b.iter().filter(|p| set.contains(p)).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn table_rows_validate() {
        let s = RunSettings::new(d("2019-01-01"), d("2021-01-01"), 1);
        let table = ScenarioConfig::table(&s);
        assert_eq!(table.len(), 12);
        for (i, c) in table.iter().enumerate() {
            c.validate(false).unwrap();
            assert_eq!(c.table_number(), Some(i as u32 + 1));
        }
        assert!(ScenarioConfig::table_row(0, &s).is_err());
        assert!(ScenarioConfig::table_row(13, &s).is_err());
    }

    #[test]
    fn composition_rules() {
        let s = RunSettings::new(d("2019-01-01"), d("2021-01-01"), 1);
        let mut c = ScenarioConfig::table_row(5, &s).unwrap();
        c.schedule = ScheduleKind::Threshold;
        assert!(c.validate(false).is_err());
        c.validate(true).unwrap();
        c.inclusion = Inclusion::NewOnly;
        assert!(c.validate(true).is_err());
        let mut c = ScenarioConfig::table_row(1, &s).unwrap();
        c.inclusion = Inclusion::NewPlusAllOld;
        assert!(c.validate(true).is_err());
    }

    #[test]
    fn mix_is_spread() {
        let seeds: HashSet<u64> = (0..1000).map(|k| mix(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
