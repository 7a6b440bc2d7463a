//! Rolling-window performance monitoring and retraining schedules.

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::corpus::EncodedDoc;
use crate::error::{Error, Result};
use crate::trainer::Learner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Threshold,
    FixedInterval,
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleKind::Threshold => "threshold",
            ScheduleKind::FixedInterval => "fixed_interval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    pub window_weeks: u32,
    pub cadence_weeks: u32,
    pub relative_drop: f64,
    pub consecutive_breaches_required: u32,
    pub fixed_interval_months: u32,
    pub schedule_kind: ScheduleKind,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            window_weeks: 4,
            cadence_weeks: 1,
            relative_drop: 0.05,
            consecutive_breaches_required: 4,
            fixed_interval_months: 6,
            schedule_kind: ScheduleKind::Threshold,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_weeks == 0
            || self.cadence_weeks == 0
            || self.consecutive_breaches_required == 0
            || self.fixed_interval_months == 0
        {
            return Err(Error::InvalidConfig("monitor: counts must be positive".into()));
        }
        if !(self.relative_drop > 0.0 && self.relative_drop < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "monitor: relative_drop must lie in (0,1), got {}",
                self.relative_drop
            )));
        }
        Ok(())
    }
}

/// `baseline * (1 - relative_drop)`.
pub fn compute_threshold(baseline: f64, relative_drop: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&baseline) {
        return Err(Error::InvalidConfig(format!("baseline must lie in [0,1], got {baseline}")));
    }
    if !(relative_drop > 0.0 && relative_drop < 1.0) {
        return Err(Error::InvalidConfig(format!("relative_drop must lie in (0,1), got {relative_drop}")));
    }
    Ok(baseline * (1.0 - relative_drop))
}

/// True once `current` reaches `last_retrain` plus `interval_months` calendar
/// months, with the day clamped to the end of the target month.
pub fn fixed_interval_due(last_retrain: NaiveDate, current: NaiveDate, interval_months: u32) -> bool {
    match last_retrain.checked_add_months(Months::new(interval_months)) {
        Some(due) => current >= due,
        None => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    None,
    TriggerRetraining,
}

/// One monitoring-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    pub week_end: NaiveDate,
    pub window_size: usize,
    pub window_score: Option<f64>,
    pub threshold: f64,
    pub breached: Option<bool>,
    pub streak: u32,
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorState {
    /// Deployed model's test score at the last (re)training.
    pub baseline_score: f64,
    pub breach_streak: u32,
    pub last_retrain: NaiveDate,
    pub history: Vec<MonitorRecord>,
}

impl MonitorState {
    pub fn new(baseline_score: f64, deployed_on: NaiveDate) -> Self {
        MonitorState { baseline_score, breach_streak: 0, last_retrain: deployed_on, history: Vec::new() }
    }

    /// Records a retraining: new baseline, streak cleared.
    pub fn reset(&mut self, baseline_score: f64, on: NaiveDate) {
        self.baseline_score = baseline_score;
        self.breach_streak = 0;
        self.last_retrain = on;
    }

    /// Feeds one weekly window score (`None` for an empty window).
    ///
    /// Under the threshold schedule a score strictly below the threshold is a
    /// breach; the streak grows on breach and clears otherwise, and reaching
    /// the required count fires a trigger and clears the streak. Empty
    /// windows leave the streak untouched. Under the fixed-interval schedule
    /// breaches are logged but the trigger depends only on the calendar.
    pub fn observe(
        &mut self,
        cfg: &MonitorConfig,
        week_end: NaiveDate,
        window_size: usize,
        score: Option<f64>,
    ) -> Result<Decision> {
        let threshold = compute_threshold(self.baseline_score, cfg.relative_drop)?;
        let breached = score.map(|s| s < threshold);
        let decision = match cfg.schedule_kind {
            ScheduleKind::Threshold => match breached {
                Some(true) => {
                    self.breach_streak += 1;
                    if self.breach_streak >= cfg.consecutive_breaches_required {
                        Decision::TriggerRetraining
                    } else {
                        Decision::None
                    }
                }
                Some(false) => {
                    self.breach_streak = 0;
                    Decision::None
                }
                None => Decision::None,
            },
            ScheduleKind::FixedInterval => {
                if fixed_interval_due(self.last_retrain, week_end, cfg.fixed_interval_months) {
                    Decision::TriggerRetraining
                } else {
                    Decision::None
                }
            }
        };
        self.history.push(MonitorRecord {
            week_end,
            window_size,
            window_score: score,
            threshold,
            breached,
            streak: self.breach_streak,
            decision,
        });
        if decision == Decision::TriggerRetraining {
            self.breach_streak = 0;
        }
        Ok(decision)
    }
}

/// Scores `model` on the window ending at `week_end` and feeds the result to
/// `state`. `window` must hold every document in
/// `[week_end - window_weeks, week_end)`.
pub fn monitor_step<L: Learner>(
    state: &mut MonitorState,
    cfg: &MonitorConfig,
    week_end: NaiveDate,
    window: &[&EncodedDoc],
    learner: &L,
    model: &L::Model,
    corpus_start: NaiveDate,
) -> Result<Decision> {
    if week_end < corpus_start {
        return Err(Error::WindowBeforeStart { window_end: week_end, corpus_start });
    }
    let score = (!window.is_empty()).then(|| learner.score(model, window));
    state.observe(cfg, week_end, window.len(), score)
}

/// Reference trigger count: scan for runs of sub-threshold scores, firing at
/// every `required`-th consecutive breach and restarting the count.
pub fn count_triggers_by_scan(scores: &[Option<f64>], threshold: f64, required: u32) -> usize {
    let mut triggers = 0;
    let mut run = 0;
    for s in scores.iter().flatten() {
        if *s < threshold {
            run += 1;
            if run == required {
                triggers += 1;
                run = 0;
            }
        } else {
            run = 0;
        }
    }
    triggers
}
