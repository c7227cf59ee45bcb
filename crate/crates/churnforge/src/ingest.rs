//! Reading and writing participation events as CSV or JSON Lines.
//!
//! Both formats carry the four fields `worker_id`, `task_id`, `timestamp`
//! (integer seconds) and `is_winner`. CSV needs a header row naming them;
//! JSONL objects may carry extra keys, which are ignored.
//!
//! Malformed data records are skipped and listed in the [`IngestReport`];
//! only an unreadable source or a CSV header without the required columns is
//! fatal.

use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use churnforge_core::{ArrivalEvent, EventLog};
use serde::{Deserialize, Serialize};

pub use churnforge_core::{finalize_log, Finalized};

pub const CSV_HEADER: [&str; 4] = ["worker_id", "task_id", "timestamp", "is_winner"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    /// `Jsonl` for `.jsonl`/`.ndjson` paths, `fallback` otherwise.
    pub fn from_path(path: &Path, fallback: Format) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => Format::Jsonl,
            Some("csv") => Format::Csv,
            _ => fallback,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(format!("unknown format {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read events: {0}")]
    Io(#[from] io::Error),
    #[error("schema error: {0}")]
    Schema(String),
}

/// Outcome of a parse: how many events were accepted and why the others
/// were not.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub events_read: usize,
    pub events_rejected: usize,
    /// `(line number, reason)`, line numbers starting at 1.
    pub rejection_reasons: Vec<(u64, String)>,
}

impl IngestReport {
    fn reject(&mut self, line: u64, reason: impl Into<String>) {
        self.events_rejected += 1;
        self.rejection_reasons.push((line, reason.into()));
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "events read: {}", self.events_read)?;
        writeln!(f, "events rejected: {}", self.events_rejected)?;
        for (line, reason) in &self.rejection_reasons {
            writeln!(f, "  line {line}: {reason}")?;
        }
        Ok(())
    }
}

/// Accepts `true`/`false` (any case) and `1`/`0`.
pub fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" => Some(true),
        "0" => Some(false),
        _ if s.eq_ignore_ascii_case("true") => Some(true),
        _ if s.eq_ignore_ascii_case("false") => Some(false),
        _ => None,
    }
}

/// Parses every record of `source`, keeping input order.
pub fn parse_events<R: Read>(
    source: R,
    format: Format,
) -> Result<(Vec<ArrivalEvent>, IngestReport), IngestError> {
    match format {
        Format::Csv => parse_csv(source),
        Format::Jsonl => parse_jsonl(source),
    }
}

fn parse_csv<R: Read>(mut source: R) -> Result<(Vec<ArrivalEvent>, IngestReport), IngestError> {
    // csv positions land on the LF of a CRLF terminator and miscount lines
    // there, so count newlines up to and including the reported byte
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let newlines: Vec<u64> = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .map(|(i, _)| i as u64)
        .collect();
    let line_at = |pos: Option<&csv::Position>| {
        pos.map_or(0, |p| {
            1 + newlines.partition_point(|&nl| nl <= p.byte()) as u64
        })
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let header = reader.headers().map_err(csv_error)?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(CSV_HEADER) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::Schema(format!("header lacks column {name:?}")))?;
    }

    let mut events = Vec::new();
    let mut report = IngestReport::default();
    let mut record = csv::StringRecord::new();
    loop {
        let more = match reader.read_record(&mut record) {
            Ok(more) => more,
            Err(err) => {
                let line = line_at(err.position());
                if let csv::ErrorKind::Io(_) = err.kind() {
                    return Err(csv_error(err));
                }
                report.reject(line, err.to_string());
                continue;
            }
        };
        if !more {
            break;
        }
        let line = line_at(record.position());
        let field = |i: usize| record.get(columns[i]);
        let (Some(worker), Some(task), Some(ts), Some(win)) =
            (field(0), field(1), field(2), field(3))
        else {
            report.reject(line, format!("expected 4 fields, found {}", record.len()));
            continue;
        };
        let Ok(ts) = ts.parse::<i64>() else {
            report.reject(line, format!("timestamp {ts:?} is not an integer"));
            continue;
        };
        let Some(win) = parse_bool(win) else {
            report.reject(line, format!("is_winner {win:?} is not a boolean"));
            continue;
        };
        match ArrivalEvent::new(worker, task, ts, win) {
            Ok(ev) => {
                report.events_read += 1;
                events.push(ev);
            }
            Err(err) => report.reject(line, err.to_string()),
        }
    }
    Ok((events, report))
}

fn csv_error(err: csv::Error) -> IngestError {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            other => IngestError::Schema(format!("{other:?}")),
        }
    } else {
        IngestError::Schema(err.to_string())
    }
}

#[derive(Serialize)]
struct JsonEventOut<'a> {
    worker_id: &'a str,
    task_id: &'a str,
    timestamp: i64,
    is_winner: bool,
}

#[derive(Deserialize)]
struct JsonEventIn {
    worker_id: String,
    task_id: String,
    timestamp: i64,
    #[serde(deserialize_with = "bool_or_bit")]
    is_winner: bool,
}

fn bool_or_bit<'de, D: serde::Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Bool(bool),
        Int(u8),
        Text(String),
    }
    let flag = Flag::deserialize(d)?;
    let parsed = match &flag {
        Flag::Bool(b) => Some(*b),
        Flag::Int(0) => Some(false),
        Flag::Int(1) => Some(true),
        Flag::Int(_) => None,
        Flag::Text(s) => parse_bool(s),
    };
    parsed.ok_or_else(|| serde::de::Error::custom("is_winner is not a boolean"))
}

fn parse_jsonl<R: Read>(source: R) -> Result<(Vec<ArrivalEvent>, IngestReport), IngestError> {
    let mut events = Vec::new();
    let mut report = IngestReport::default();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        let number = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonEventIn = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(err) => {
                report.reject(number, err.to_string());
                continue;
            }
        };
        match ArrivalEvent::new(
            parsed.worker_id,
            parsed.task_id,
            parsed.timestamp,
            parsed.is_winner,
        ) {
            Ok(ev) => {
                report.events_read += 1;
                events.push(ev);
            }
            Err(err) => report.reject(number, err.to_string()),
        }
    }
    Ok((events, report))
}

/// Writes events in the given format (CSV with its header row).
pub fn write_events<W: Write>(sink: W, events: &[ArrivalEvent], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink);
            w.write_record(CSV_HEADER)?;
            for ev in events {
                w.write_record([
                    ev.worker_id(),
                    ev.task_id(),
                    &ev.timestamp().to_string(),
                    if ev.is_winner() { "true" } else { "false" },
                ])?;
            }
            w.flush()
        }
        Format::Jsonl => {
            let mut w = io::BufWriter::new(sink);
            for ev in events {
                let out = JsonEventOut {
                    worker_id: ev.worker_id(),
                    task_id: ev.task_id(),
                    timestamp: ev.timestamp(),
                    is_winner: ev.is_winner(),
                };
                serde_json::to_writer(&mut w, &out)?;
                w.write_all(b"\n")?;
            }
            w.flush()
        }
    }
}

/// Serializes a whole log to bytes.
pub fn serialize_log(log: &EventLog, format: Format) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events(&mut buf, log.events(), format).expect("writing to memory cannot fail");
    buf
}
