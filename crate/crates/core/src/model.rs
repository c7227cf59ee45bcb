//! Domain types shared by the whole pipeline.
//!
//! Every constructor validates its invariants, so a value of any of these
//! types is known to be well formed.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Validation failures for the domain types.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("worker_id must be non-empty")]
    EmptyWorkerId,
    #[error("task_id must be non-empty")]
    EmptyTaskId,
    #[error("timestamp {0} is negative")]
    NegativeTimestamp(i64),
    #[error("horizon start {start} is after horizon end {end}")]
    InvalidHorizon { start: i64, end: i64 },
    #[error("event at index {index} breaks the (timestamp, task_id, worker_id) order")]
    Unsorted { index: usize },
    #[error("worker {worker} participates in task {task} more than once")]
    DuplicateParticipation { worker: String, task: String },
    #[error("task {task} has more than one winner")]
    MultipleWinners { task: String },
    #[error("timestamp {timestamp} lies outside the horizon [{start}, {end}]")]
    OutOfHorizon {
        timestamp: i64,
        start: i64,
        end: i64,
    },
    #[error("an empty event list needs an explicit horizon")]
    EmptyWithoutHorizon,
    #[error("participation degree must be at least 1")]
    ZeroParticipation,
    #[error("winning degree {winning} exceeds participation degree {participation}")]
    WinsExceedParticipation { winning: u64, participation: u64 },
    #[error("a bin table has exactly 10 rows, got {0}")]
    BinRowCount(usize),
    #[error("bin row {row} has range {low}-{high}, expected {expected_low}-{expected_high}")]
    BinRange {
        row: usize,
        low: u32,
        high: u32,
        expected_low: u32,
        expected_high: u32,
    },
    #[error("bin row {row}: count and mean disagree about emptiness")]
    BinEmptyMarker { row: usize },
    #[error("bin row {row}: mean {mean} lies outside the row's range")]
    BinMeanOutOfRange { row: usize, mean: f64 },
}

/// One worker entering one contest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrivalEvent {
    worker_id: String,
    task_id: String,
    timestamp: i64,
    is_winner: bool,
}

impl ArrivalEvent {
    pub fn new(
        worker_id: impl Into<String>,
        task_id: impl Into<String>,
        timestamp: i64,
        is_winner: bool,
    ) -> Result<Self, ModelError> {
        let worker_id = worker_id.into();
        let task_id = task_id.into();
        if worker_id.is_empty() {
            return Err(ModelError::EmptyWorkerId);
        }
        if task_id.is_empty() {
            return Err(ModelError::EmptyTaskId);
        }
        if timestamp < 0 {
            return Err(ModelError::NegativeTimestamp(timestamp));
        }
        Ok(ArrivalEvent {
            worker_id,
            task_id,
            timestamp,
            is_winner,
        })
    }

    pub fn worker_id(&self) -> &str {
        &self.worker_id
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    /// Seconds since the epoch.
    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn is_winner(&self) -> bool {
        self.is_winner
    }

    fn sort_key(&self) -> (i64, &str, &str) {
        (self.timestamp, &self.task_id, &self.worker_id)
    }
}

/// A validated, time-sorted list of participation events over an
/// observation window.
///
/// Events are ordered by `(timestamp, task_id, worker_id)`, every
/// `(worker, task)` pair appears at most once, every task has at most one
/// winner and all timestamps lie inside `[horizon_start, horizon_end]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<ArrivalEvent>,
    horizon_start: i64,
    horizon_end: i64,
}

impl EventLog {
    /// Checks every invariant of an already sorted event list.
    pub fn new(
        events: Vec<ArrivalEvent>,
        horizon_start: i64,
        horizon_end: i64,
    ) -> Result<Self, ModelError> {
        if horizon_start > horizon_end {
            return Err(ModelError::InvalidHorizon {
                start: horizon_start,
                end: horizon_end,
            });
        }
        for (index, pair) in events.windows(2).enumerate() {
            if pair[0].sort_key() > pair[1].sort_key() {
                return Err(ModelError::Unsorted { index: index + 1 });
            }
        }
        let mut seen: BTreeMap<(&str, &str), ()> = BTreeMap::new();
        let mut winners: BTreeMap<&str, ()> = BTreeMap::new();
        for ev in &events {
            if ev.timestamp < horizon_start || ev.timestamp > horizon_end {
                return Err(ModelError::OutOfHorizon {
                    timestamp: ev.timestamp,
                    start: horizon_start,
                    end: horizon_end,
                });
            }
            if seen.insert((&ev.worker_id, &ev.task_id), ()).is_some() {
                return Err(ModelError::DuplicateParticipation {
                    worker: ev.worker_id.clone(),
                    task: ev.task_id.clone(),
                });
            }
            if ev.is_winner && winners.insert(&ev.task_id, ()).is_some() {
                return Err(ModelError::MultipleWinners {
                    task: ev.task_id.clone(),
                });
            }
        }
        Ok(EventLog {
            events,
            horizon_start,
            horizon_end,
        })
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        &self.events
    }

    pub fn horizon_start(&self) -> i64 {
        self.horizon_start
    }

    pub fn horizon_end(&self) -> i64 {
        self.horizon_end
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<ArrivalEvent> {
        self.events
    }

    /// Each worker's arrival times in ascending order, keyed by worker id.
    pub fn arrival_times(&self) -> BTreeMap<&str, Vec<i64>> {
        let mut out: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
        // events are time-sorted, so every per-worker list comes out sorted
        for ev in &self.events {
            out.entry(ev.worker_id.as_str())
                .or_default()
                .push(ev.timestamp);
        }
        out
    }

    /// The sub-log of events with `timestamp <= cut_time`, keeping the
    /// horizon start and ending the horizon at the cut.
    pub fn truncated(&self, cut_time: i64) -> EventLog {
        let events: Vec<ArrivalEvent> = self
            .events
            .iter()
            .take_while(|e| e.timestamp <= cut_time)
            .cloned()
            .collect();
        EventLog {
            events,
            horizon_start: self.horizon_start,
            horizon_end: cut_time.clamp(self.horizon_start, self.horizon_end),
        }
    }
}

/// Result of [`finalize_log`]: the log plus the `(worker, task)` pairs whose
/// duplicate events were merged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finalized {
    pub log: EventLog,
    pub collapsed: Vec<(String, String)>,
}

/// Sorts raw events into an [`EventLog`].
///
/// Duplicate `(worker, task)` events collapse into one event that keeps the
/// earliest timestamp and the OR of the winner flags; each merged duplicate is
/// listed in [`Finalized::collapsed`]. The horizon defaults to the span of the
/// timestamps.
pub fn finalize_log(
    mut events: Vec<ArrivalEvent>,
    horizon: Option<(i64, i64)>,
) -> Result<Finalized, ModelError> {
    let (start, end) = match horizon {
        Some(h) => h,
        None => {
            let min = events.iter().map(|e| e.timestamp).min();
            let max = events.iter().map(|e| e.timestamp).max();
            match (min, max) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(ModelError::EmptyWithoutHorizon),
            }
        }
    };

    events.sort_by(|a, b| {
        (&a.worker_id, &a.task_id, a.timestamp).cmp(&(&b.worker_id, &b.task_id, b.timestamp))
    });
    let mut collapsed = Vec::new();
    let mut merged: Vec<ArrivalEvent> = Vec::with_capacity(events.len());
    for ev in events {
        match merged.last_mut() {
            Some(last) if last.worker_id == ev.worker_id && last.task_id == ev.task_id => {
                last.is_winner |= ev.is_winner;
                collapsed.push((ev.worker_id, ev.task_id));
            }
            _ => merged.push(ev),
        }
    }
    merged.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let log = EventLog::new(merged, start, end)?;
    Ok(Finalized { log, collapsed })
}

/// Per-worker classifier features taken from the participation and winner
/// networks.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerFeatures {
    worker_id: String,
    participation_degree: u64,
    winning_degree: u64,
    success_rate: f64,
}

impl WorkerFeatures {
    pub fn new(
        worker_id: impl Into<String>,
        participation_degree: u64,
        winning_degree: u64,
    ) -> Result<Self, ModelError> {
        if participation_degree == 0 {
            return Err(ModelError::ZeroParticipation);
        }
        if winning_degree > participation_degree {
            return Err(ModelError::WinsExceedParticipation {
                winning: winning_degree,
                participation: participation_degree,
            });
        }
        Ok(WorkerFeatures {
            worker_id: worker_id.into(),
            participation_degree,
            winning_degree,
            success_rate: winning_degree as f64 / participation_degree as f64,
        })
    }

    pub fn worker_id(&self) -> &str {
        &self.worker_id
    }

    pub fn participation_degree(&self) -> u64 {
        self.participation_degree
    }

    pub fn winning_degree(&self) -> u64 {
        self.winning_degree
    }

    /// `winning_degree / participation_degree`, in `[0, 1]`.
    pub fn success_rate(&self) -> f64 {
        self.success_rate
    }

    /// Feature vector in the order (participation, winning, success rate).
    pub fn vector(&self) -> [f64; 3] {
        [
            self.participation_degree as f64,
            self.winning_degree as f64,
            self.success_rate,
        ]
    }

    /// Index of the success-rate bin, using `[0,10], (10,20], ..., (90,100]`
    /// percent. Decided with integer arithmetic only.
    pub fn bin_index(&self) -> usize {
        // smallest b with 10 * wins <= (b + 1) * participations
        let scaled = 10 * self.winning_degree;
        let p = self.participation_degree;
        let b = scaled.div_ceil(p);
        b.saturating_sub(1) as usize
    }
}

/// Binary outcome assigned to a worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DropoutLabel {
    Dropout,
    Active,
}

impl DropoutLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DropoutLabel::Dropout => "dropout",
            DropoutLabel::Active => "active",
        }
    }

    pub fn flip(self) -> Self {
        match self {
            DropoutLabel::Dropout => DropoutLabel::Active,
            DropoutLabel::Active => DropoutLabel::Dropout,
        }
    }

    /// Accepts `dropout`/`active` in any case, and `1`/`0`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("dropout") || s == "1" {
            Some(DropoutLabel::Dropout)
        } else if s.eq_ignore_ascii_case("active") || s == "0" {
            Some(DropoutLabel::Active)
        } else {
            None
        }
    }
}

impl fmt::Display for DropoutLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a worker's arrival history is turned into a [`DropoutLabel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    /// Dropout when the final inter-arrival gap exceeds `psi` seconds.
    ThresholdLastGap { psi: u64 },
    /// Dropout when the time from the last arrival to the horizon end
    /// exceeds `psi` seconds.
    ThresholdAbsence { psi: u64 },
    /// Dropout when the worker has no arrival after `cut_time`.
    WindowAbsence { cut_time: i64 },
}

/// Number of success-rate bins in a [`BinTable`].
pub const BIN_COUNT: usize = 10;

/// One row of a [`BinTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinRow {
    pub low_pct: u32,
    pub high_pct: u32,
    pub count: usize,
    /// Mean success rate in percent; `None` for an empty row.
    pub mean_success_pct: Option<f64>,
}

impl BinRow {
    /// Whether `pct` belongs to this row (the first row is closed on both
    /// ends, the others are open below).
    pub fn contains(&self, pct: f64) -> bool {
        let above_low = if self.low_pct == 0 {
            pct >= 0.0
        } else {
            pct > f64::from(self.low_pct)
        };
        above_low && pct <= f64::from(self.high_pct)
    }

    pub fn label(&self) -> String {
        alloc::format!("{}-{}", self.low_pct, self.high_pct)
    }
}

/// Dropout counts and mean success rates over ten success-rate ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTable {
    rows: [BinRow; BIN_COUNT],
}

impl BinTable {
    /// Builds a table from `(count, mean percent)` pairs, one per bin in
    /// ascending range order.
    pub fn from_counts_and_means(
        cells: [(usize, Option<f64>); BIN_COUNT],
    ) -> Result<Self, ModelError> {
        let rows = cells
            .iter()
            .enumerate()
            .map(|(i, &(count, mean))| BinRow {
                low_pct: 10 * i as u32,
                high_pct: 10 * (i as u32 + 1),
                count,
                mean_success_pct: mean,
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<BinRow>) -> Result<Self, ModelError> {
        if rows.len() != BIN_COUNT {
            return Err(ModelError::BinRowCount(rows.len()));
        }
        for (i, row) in rows.iter().enumerate() {
            let (lo, hi) = (10 * i as u32, 10 * (i as u32 + 1));
            if row.low_pct != lo || row.high_pct != hi {
                return Err(ModelError::BinRange {
                    row: i,
                    low: row.low_pct,
                    high: row.high_pct,
                    expected_low: lo,
                    expected_high: hi,
                });
            }
            match row.mean_success_pct {
                None if row.count == 0 => {}
                Some(mean) if row.count > 0 => {
                    if !row.contains(mean) {
                        return Err(ModelError::BinMeanOutOfRange { row: i, mean });
                    }
                }
                _ => return Err(ModelError::BinEmptyMarker { row: i }),
            }
        }
        let mut out = [BinRow {
            low_pct: 0,
            high_pct: 0,
            count: 0,
            mean_success_pct: None,
        }; BIN_COUNT];
        out.copy_from_slice(&rows);
        Ok(BinTable { rows: out })
    }

    pub fn rows(&self) -> &[BinRow; BIN_COUNT] {
        &self.rows
    }

    /// Sum of the dropout counts over all rows.
    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }
}
