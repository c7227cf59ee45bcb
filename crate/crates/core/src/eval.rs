//! Accuracy and the train/test split-ratio sweep.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{ClassifyError, GnbModel, KnnModel, Scaling};
use crate::label::LabeledWorker;
use crate::model::DropoutLabel;

/// Redraw budget per ratio when a shuffle leaves a single-class training set.
pub const MAX_REDRAWS: u64 = 100;

/// The nine train percentages 10, 20, ..., 90.
pub const DEFAULT_RATIOS: [u32; 9] = [10, 20, 30, 40, 50, 60, 70, 80, 90];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("predictions ({0}) and truths ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("cannot score an empty prediction list")]
    Empty,
    #[error("train percentage {0} must lie strictly between 0 and 100")]
    InvalidRatio(u32),
    #[error("labeled data holds only one class")]
    SingleClass,
    #[error("train percentage {pct} leaves no test records out of {n}")]
    EmptyTestSet { pct: u32, n: usize },
    #[error("train percentage {0}: every one of {MAX_REDRAWS} shuffles gave a single-class training set")]
    RedrawsExhausted(u32),
    #[error("train percentage {pct}: {source}")]
    Classifier { pct: u32, source: ClassifyError },
}

/// Percentage of predictions equal to the truth.
pub fn accuracy(predictions: &[DropoutLabel], truths: &[DropoutLabel]) -> Result<f64, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), truths.len()));
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// Test-set accuracies (percent) for one train percentage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub train_pct: u32,
    pub acc_knn1: f64,
    pub acc_knn3: f64,
    pub acc_gnb: f64,
}

/// Seed of the shuffle for one `(ratio, attempt)` pair.
fn shuffle_seed(seed: u64, pct: u32, attempt: u64) -> u64 {
    seed.wrapping_add((u64::from(pct) << 32) | attempt)
}

/// Runs [`split_sweep_with`] using standardized k-NN features.
pub fn split_sweep(
    data: &[LabeledWorker],
    ratios: &[u32],
    seed: u64,
) -> Result<Vec<SweepRow>, EvalError> {
    split_sweep_with(data, ratios, seed, Scaling::Standardized)
}

/// For each train percentage: shuffle the labeled workers (seeded), train on
/// the first `ceil(pct * n / 100)`, and score k-NN (k = 1, 3) and Gaussian
/// naive Bayes on the rest.
///
/// The data is put in worker id order before shuffling, so the result does
/// not depend on input order. A shuffle whose training part holds a single
/// class is redrawn with the next sub-seed.
pub fn split_sweep_with(
    data: &[LabeledWorker],
    ratios: &[u32],
    seed: u64,
    scaling: Scaling,
) -> Result<Vec<SweepRow>, EvalError> {
    let mut pool: Vec<&LabeledWorker> = data.iter().collect();
    pool.sort_by(|a, b| a.features.worker_id().cmp(b.features.worker_id()));
    let has = |l: DropoutLabel| pool.iter().any(|w| w.label == l);
    if !(has(DropoutLabel::Dropout) && has(DropoutLabel::Active)) {
        return Err(EvalError::SingleClass);
    }
    if let Some(&bad) = ratios.iter().find(|&&r| r == 0 || r >= 100) {
        return Err(EvalError::InvalidRatio(bad));
    }
    ratios
        .iter()
        .map(|&pct| sweep_row(&pool, pct, seed, scaling))
        .collect()
}

fn sweep_row(
    pool: &[&LabeledWorker],
    pct: u32,
    seed: u64,
    scaling: Scaling,
) -> Result<SweepRow, EvalError> {
    let n = pool.len();
    let n_train = (pct as usize * n).div_ceil(100);
    if n_train >= n {
        return Err(EvalError::EmptyTestSet { pct, n });
    }
    let wrap = |source| EvalError::Classifier { pct, source };
    for attempt in 0..MAX_REDRAWS {
        let mut order: Vec<&LabeledWorker> = pool.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(
            seed, pct, attempt,
        )));
        let (train, test) = order.split_at(n_train);
        let first = train[0].label;
        if train.iter().all(|w| w.label == first) {
            continue;
        }
        let train: Vec<LabeledWorker> = train.iter().map(|w| (*w).clone()).collect();
        let knn1 = KnnModel::fit(&train, 1, scaling).map_err(wrap)?;
        let knn3 = KnnModel::fit(&train, 3, scaling).map_err(wrap)?;
        let gnb = GnbModel::fit(&train).map_err(wrap)?;

        let truths: Vec<DropoutLabel> = test.iter().map(|w| w.label).collect();
        let score = |predict: &dyn Fn(&LabeledWorker) -> DropoutLabel| {
            let preds: Vec<DropoutLabel> = test.iter().map(|w| predict(w)).collect();
            accuracy(&preds, &truths)
        };
        return Ok(SweepRow {
            train_pct: pct,
            acc_knn1: score(&|w| knn1.predict(&w.features))?,
            acc_knn3: score(&|w| knn3.predict(&w.features))?,
            acc_gnb: score(&|w| gnb.predict(&w.features))?,
        });
    }
    Err(EvalError::RedrawsExhausted(pct))
}
