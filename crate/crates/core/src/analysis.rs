//! Pearson correlation, success-rate binning of dropouts, and the bin-level
//! correlation between success rate and dropout count.

use alloc::vec::Vec;

use crate::model::{BinTable, WorkerFeatures, BIN_COUNT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("correlation is undefined: {0} has zero variance")]
    ZeroVariance(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub rho: f64,
    pub n_points: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation coefficient, computed in two passes
/// (means first, then centered moments).
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(StatsError::TooFewPoints(n));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("xs"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("ys"));
    }
    let rho = (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0);
    Ok(CorrelationResult { rho, n_points: n })
}

/// Correlation between participation degree and winning degree.
pub fn degree_correlation(features: &[WorkerFeatures]) -> Result<CorrelationResult, StatsError> {
    let xs: Vec<f64> = features
        .iter()
        .map(|f| f.participation_degree() as f64)
        .collect();
    let ys: Vec<f64> = features.iter().map(|f| f.winning_degree() as f64).collect();
    pearson(&xs, &ys)
}

/// Tallies dropouts into ten success-rate bins and averages each bin's
/// success rate (in percent).
pub fn bin_success_rates(dropouts: &[WorkerFeatures]) -> BinTable {
    let mut counts = [0usize; BIN_COUNT];
    let mut sums = [0.0f64; BIN_COUNT];
    for f in dropouts {
        let b = f.bin_index();
        counts[b] += 1;
        sums[b] += (100 * f.winning_degree()) as f64 / f.participation_degree() as f64;
    }
    let mut cells = [(0usize, None); BIN_COUNT];
    for (b, cell) in cells.iter_mut().enumerate() {
        if counts[b] > 0 {
            *cell = (counts[b], Some(sums[b] / counts[b] as f64));
        }
    }
    BinTable::from_counts_and_means(cells).expect("every member lies inside its bin")
}

/// Correlation between mean success rate and dropout count over the
/// non-empty bins, optionally leaving out the top `(90,100]` bin.
pub fn bin_dropout_correlation(
    table: &BinTable,
    exclude_top_bin: bool,
) -> Result<CorrelationResult, StatsError> {
    let usable = if exclude_top_bin {
        BIN_COUNT - 1
    } else {
        BIN_COUNT
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = table.rows()[..usable]
        .iter()
        .filter_map(|r| r.mean_success_pct.map(|m| (m, r.count as f64)))
        .unzip();
    pearson(&xs, &ys)
}
