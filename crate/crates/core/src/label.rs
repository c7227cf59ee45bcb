//! Inter-arrival gaps, dropout labeling and the chronological labeling cut.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::model::{DropoutLabel, EventLog, LabelRule, WorkerFeatures};
use crate::network::features_from_log;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelError {
    #[error("arrival times are not sorted ascending (index {0})")]
    Unsorted(usize),
    #[error("a worker needs at least one arrival to be labeled")]
    NoArrivals,
    #[error("arrival at {time} is after the horizon end {horizon_end}")]
    AfterHorizon { time: i64, horizon_end: i64 },
    #[error("worker has no arrival at or before the cut {0}")]
    OutsidePopulation(i64),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("the event log is empty")]
    EmptyLog,
}

/// A worker's pre-cut features together with its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWorker {
    pub features: WorkerFeatures,
    pub label: DropoutLabel,
}

/// Gaps between successive arrivals: `[t2 - t1, ..., tn - tn-1]`.
pub fn inter_arrival(times: &[i64]) -> Result<Vec<i64>, LabelError> {
    times
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            if w[1] < w[0] {
                Err(LabelError::Unsorted(i + 1))
            } else {
                Ok(w[1] - w[0])
            }
        })
        .collect()
}

fn exceeds(gap: i64, psi: u64) -> bool {
    // gaps are non-negative here
    gap as u64 > psi
}

/// Labels one worker from its sorted arrival times.
///
/// `ThresholdLastGap` answers `Active` for a single arrival since no gap
/// exists yet.
pub fn apply_label_rule(
    times: &[i64],
    rule: LabelRule,
    horizon_end: i64,
) -> Result<DropoutLabel, LabelError> {
    let gaps = inter_arrival(times)?;
    let last = *times.last().ok_or(LabelError::NoArrivals)?;
    if last > horizon_end {
        return Err(LabelError::AfterHorizon {
            time: last,
            horizon_end,
        });
    }
    let dropout = match rule {
        LabelRule::ThresholdLastGap { psi } => gaps.last().is_some_and(|&g| exceeds(g, psi)),
        LabelRule::ThresholdAbsence { psi } => exceeds(horizon_end - last, psi),
        LabelRule::WindowAbsence { cut_time } => {
            if times[0] > cut_time {
                return Err(LabelError::OutsidePopulation(cut_time));
            }
            last <= cut_time
        }
    };
    Ok(if dropout {
        DropoutLabel::Dropout
    } else {
        DropoutLabel::Active
    })
}

/// Number of tasks that must finish inside the training window.
fn train_task_count(train_fraction: f64, tasks: usize) -> usize {
    // slack absorbs representation error in fractions such as 2/3
    let raw = train_fraction * tasks as f64;
    let k = libm::ceil(raw - 1e-9 * raw.max(1.0)) as usize;
    k.clamp(1, tasks)
}

/// The smallest timestamp by which at least `ceil(train_fraction * D)` of the
/// log's `D` distinct tasks have all of their events.
pub fn split_cut_time(log: &EventLog, train_fraction: f64) -> Result<i64, LabelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(LabelError::InvalidFraction(train_fraction));
    }
    let mut task_end: BTreeMap<&str, i64> = BTreeMap::new();
    for ev in log.events() {
        let end = task_end.entry(ev.task_id()).or_insert(ev.timestamp());
        *end = (*end).max(ev.timestamp());
    }
    if task_end.is_empty() {
        return Err(LabelError::EmptyLog);
    }
    let mut ends: Vec<i64> = task_end.into_values().collect();
    ends.sort_unstable();
    let k = train_task_count(train_fraction, ends.len());
    Ok(ends[k - 1])
}

/// Window-absence labeling around `cut_time`.
///
/// The population is every worker with an event at or before the cut. Their
/// features come from those events only; a worker is a dropout when it has no
/// event after the cut. Output is sorted by worker id.
pub fn label_dataset(log: &EventLog, cut_time: i64) -> Vec<LabeledWorker> {
    let before = log.truncated(cut_time);
    let mut returns: BTreeMap<&str, ()> = BTreeMap::new();
    for ev in log.events().iter().filter(|e| e.timestamp() > cut_time) {
        returns.insert(ev.worker_id(), ());
    }
    features_from_log(&before)
        .into_iter()
        .map(|features| {
            let label = if returns.contains_key(features.worker_id()) {
                DropoutLabel::Active
            } else {
                DropoutLabel::Dropout
            };
            LabeledWorker { features, label }
        })
        .collect()
}

/// Labels every worker of the log under `rule`.
///
/// `WindowAbsence` is [`label_dataset`]. The threshold rules label from each
/// worker's full arrival history and use whole-log features.
pub fn label_by_rule(log: &EventLog, rule: LabelRule) -> Result<Vec<LabeledWorker>, LabelError> {
    if let LabelRule::WindowAbsence { cut_time } = rule {
        return Ok(label_dataset(log, cut_time));
    }
    let times = log.arrival_times();
    features_from_log(log)
        .into_iter()
        .map(|features| {
            let label = apply_label_rule(&times[features.worker_id()], rule, log.horizon_end())?;
            Ok(LabeledWorker { features, label })
        })
        .collect()
}
