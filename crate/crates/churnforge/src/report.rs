//! CSV and aligned-text renderings of the pipeline outputs, and the readers
//! for the CSV files other subcommands consume.

use std::fmt::Write as _;
use std::io::Read;

use churnforge_core::analysis::{CorrelationResult, StatsError};
use churnforge_core::eval::SweepRow;
use churnforge_core::label::LabeledWorker;
use churnforge_core::model::{BinRow, BIN_COUNT};
use churnforge_core::{BinTable, DropoutLabel, WorkerFeatures};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
    #[error("header lacks column {0:?}")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Table(#[from] churnforge_core::ModelError),
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn feature_cells(f: &WorkerFeatures) -> Vec<String> {
    vec![
        f.worker_id().to_string(),
        f.participation_degree().to_string(),
        f.winning_degree().to_string(),
        format!("{:.6}", f.success_rate()),
    ]
}

pub const FEATURE_HEADER: [&str; 4] = [
    "worker_id",
    "participation_degree",
    "winning_degree",
    "success_rate",
];
pub const LABEL_HEADER: [&str; 5] = [
    "worker_id",
    "participation_degree",
    "winning_degree",
    "success_rate",
    "label",
];
pub const BINS_HEADER: [&str; 3] = ["range", "count", "mean_success_rate_pct"];
pub const SWEEP_HEADER: [&str; 4] = ["train_pct", "knn1", "knn3", "bayes"];

pub fn features_csv(features: &[WorkerFeatures]) -> Vec<u8> {
    csv_bytes(&FEATURE_HEADER, features.iter().map(feature_cells))
}

pub fn labels_csv(labeled: &[LabeledWorker]) -> Vec<u8> {
    csv_bytes(
        &LABEL_HEADER,
        labeled.iter().map(|lw| {
            let mut cells = feature_cells(&lw.features);
            cells.push(lw.label.to_string());
            cells
        }),
    )
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, ReportError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or(ReportError::MissingColumn(name))
}

/// Reads a labels CSV. The success rate is recomputed from the degrees.
pub fn read_labels<R: Read>(source: R) -> Result<Vec<LabeledWorker>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let id = column(&headers, "worker_id")?;
    let p = column(&headers, "participation_degree")?;
    let w = column(&headers, "winning_degree")?;
    let l = column(&headers, "label")?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        let bad = |reason: String| ReportError::Row { line, reason };
        let int = |i: usize| {
            record[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("{:?} is not a count", &record[i])))
        };
        let features =
            WorkerFeatures::new(&record[id], int(p)?, int(w)?).map_err(|e| bad(e.to_string()))?;
        let label = DropoutLabel::parse(&record[l])
            .ok_or_else(|| bad(format!("{:?} is not a label", &record[l])))?;
        out.push(LabeledWorker { features, label });
    }
    Ok(out)
}

fn mean_cell(row: &BinRow) -> String {
    row.mean_success_pct
        .map_or_else(|| "-".to_string(), |m| format!("{m:.2}"))
}

pub fn bins_csv(table: &BinTable) -> Vec<u8> {
    csv_bytes(
        &BINS_HEADER,
        table
            .rows()
            .iter()
            .map(|r| vec![r.label(), r.count.to_string(), mean_cell(r)]),
    )
}

pub fn bins_text(table: &BinTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>14}",
        "Range (%)", "Dropouts", "Mean rate (%)"
    );
    for r in table.rows() {
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>14}",
            r.label(),
            r.count,
            mean_cell(r)
        );
    }
    let _ = writeln!(out, "{:<10} {:>10}", "total", table.total_count());
    out
}

/// Reads a bin table CSV (`range,count,mean_success_rate_pct`). Empty
/// rows carry `-` or nothing in the mean column.
pub fn read_bins<R: Read>(source: R) -> Result<BinTable, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let range = column(&headers, "range")?;
    let count = column(&headers, "count")?;
    let mean = column(&headers, "mean_success_rate_pct")?;
    let mut rows = Vec::with_capacity(BIN_COUNT);
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        let bad = |reason: String| ReportError::Row { line, reason };
        let (lo, hi) = record[range]
            .split_once('-')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
            .ok_or_else(|| {
                bad(format!(
                    "range {:?} is not of the form lo-hi",
                    &record[range]
                ))
            })?;
        let n: usize = record[count]
            .parse()
            .map_err(|_| bad(format!("count {:?}", &record[count])))?;
        let m = match &record[mean] {
            "" | "-" => None,
            s => Some(s.parse::<f64>().map_err(|_| bad(format!("mean {s:?}")))?),
        };
        rows.push(BinRow {
            low_pct: lo,
            high_pct: hi,
            count: n,
            mean_success_pct: m,
        });
    }
    Ok(BinTable::from_rows(rows)?)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    csv_bytes(
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.train_pct.to_string(),
                format!("{:.2}", r.acc_knn1),
                format!("{:.2}", r.acc_knn3),
                format!("{:.2}", r.acc_gnb),
            ]
        }),
    )
}

pub fn sweep_text(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<11} {:>12} {:>12} {:>8}",
        "Train-Test", "k-NN (k=1)", "k-NN (k=3)", "Bayes"
    );
    for r in rows {
        let split = format!("{}-{}", r.train_pct, 100 - r.train_pct);
        let _ = writeln!(
            out,
            "{:<11} {:>12.2} {:>12.2} {:>8.2}",
            split, r.acc_knn1, r.acc_knn3, r.acc_gnb
        );
    }
    out
}

/// Reads a sweep CSV back into rows.
pub fn read_sweep<R: Read>(source: R) -> Result<Vec<SweepRow>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let cols = [
        column(&headers, "train_pct")?,
        column(&headers, "knn1")?,
        column(&headers, "knn3")?,
        column(&headers, "bayes")?,
    ];
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        let num = |i: usize| {
            record[cols[i]]
                .parse::<f64>()
                .map_err(|_| ReportError::Row {
                    line,
                    reason: format!("{:?} is not a number", &record[cols[i]]),
                })
        };
        out.push(SweepRow {
            train_pct: num(0)? as u32,
            acc_knn1: num(1)?,
            acc_knn3: num(2)?,
            acc_gnb: num(3)?,
        });
    }
    Ok(out)
}

/// A named correlation, or the reason it is undefined.
pub struct CorrelationEntry {
    pub name: &'static str,
    pub result: Result<CorrelationResult, StatsError>,
}

pub fn correlations_csv(entries: &[CorrelationEntry]) -> Vec<u8> {
    csv_bytes(
        &["metric", "rho", "n_points", "note"],
        entries.iter().map(|e| match &e.result {
            Ok(r) => vec![
                e.name.into(),
                format!("{:.6}", r.rho),
                r.n_points.to_string(),
                String::new(),
            ],
            Err(err) => vec![e.name.into(), "NA".into(), "0".into(), err.to_string()],
        }),
    )
}

pub fn correlations_text(entries: &[CorrelationEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let _ = match &e.result {
            Ok(r) => writeln!(
                out,
                "{:<28} rho = {:>9.4}  (n = {})",
                e.name, r.rho, r.n_points
            ),
            Err(err) => writeln!(out, "{:<28} undefined: {err}", e.name),
        };
    }
    out
}
