//! Drive the monitor by hand: threshold arithmetic, consecutive breaches,
//! empty windows and the fixed-interval calendar.
//!
//! ```bash
//! cargo run --example monitor_triggers
//! ```

use chrono::{Days, NaiveDate};
use ctsim::monitor::{
    compute_threshold, count_triggers_by_scan, fixed_interval_due, Decision, MonitorConfig, MonitorState, ScheduleKind,
};

fn main() -> ctsim::Result<()> {
    let date = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").expect("valid date");
    println!("threshold for baseline 0.80 and a 5% relative drop: {}", compute_threshold(0.80, 0.05)?);

    let cfg = MonitorConfig::default();
    let scores = [
        Some(0.79),
        Some(0.75),
        Some(0.75),
        None, // a week without documents leaves the streak alone
        Some(0.74),
        Some(0.70),
        Some(0.76), // exactly the threshold: not a breach
        Some(0.75),
    ];
    let mut state = MonitorState::new(0.80, date("2020-01-01"));
    let mut week = date("2020-01-05");
    for score in scores {
        let decision = state.observe(&cfg, week, score.map_or(0, |_| 25), score)?;
        let r = state.history.last().expect("just recorded");
        println!(
            "{week}: score {:>6} breached {:>5} streak {} {}",
            score.map_or("-".into(), |s| format!("{s:.2}")),
            r.breached.map_or("-".into(), |b| b.to_string()),
            r.streak,
            if decision == Decision::TriggerRetraining { "=> retrain" } else { "" }
        );
        week = week + Days::new(7);
    }
    println!("scan oracle agrees: {} trigger(s)", count_triggers_by_scan(&scores, 0.76, 4));

    let fixed = MonitorConfig { schedule_kind: ScheduleKind::FixedInterval, ..cfg };
    let mut last = date("2019-01-01");
    let mut week = last;
    let mut fired = Vec::new();
    while week < date("2021-01-01") {
        week = week + Days::new(7);
        if week < date("2021-01-01") && fixed_interval_due(last, week, fixed.fixed_interval_months) {
            fired.push(week);
            last = week;
        }
    }
    println!("fixed interval of {} months over 2019-2020 fires on {fired:?}", fixed.fixed_interval_months);
    Ok(())
}
