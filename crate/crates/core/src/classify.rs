//! k-nearest-neighbors and Gaussian naive Bayes over the three worker
//! features (participation degree, winning degree, success rate).
//!
//! Both classifiers are deterministic. k-NN breaks distance ties by stored
//! order (worker id order when fitted from labeled workers); naive Bayes
//! breaks an exact score tie toward [`DropoutLabel::Dropout`].

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::label::LabeledWorker;
use crate::model::{DropoutLabel, WorkerFeatures};

pub const N_FEATURES: usize = 3;

/// A point in feature space.
pub type FeatureVector = [f64; N_FEATURES];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("k must be a positive odd number, got {0}")]
    InvalidK(usize),
    #[error("k = {k} exceeds the training set size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("training set holds only {0} workers; both classes are required")]
    SingleClass(DropoutLabel),
}

/// Per-feature z-score transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardScaler {
    mean: FeatureVector,
    std: FeatureVector,
}

impl StandardScaler {
    /// Lower bound applied to every fitted standard deviation.
    pub const STD_FLOOR: f64 = 1e-9;

    /// Fits population means and standard deviations. `points` must be
    /// non-empty.
    pub fn fit(points: &[FeatureVector]) -> Self {
        let n = points.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        let mut std = [0.0; N_FEATURES];
        for j in 0..N_FEATURES {
            mean[j] = points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = points
                .iter()
                .map(|p| (p[j] - mean[j]) * (p[j] - mean[j]))
                .sum::<f64>()
                / n;
            std[j] = libm::sqrt(var).max(Self::STD_FLOOR);
        }
        StandardScaler { mean, std }
    }

    /// The transform that leaves vectors unchanged.
    pub fn identity() -> Self {
        StandardScaler {
            mean: [0.0; N_FEATURES],
            std: [1.0; N_FEATURES],
        }
    }

    pub fn transform(&self, x: &FeatureVector) -> FeatureVector {
        core::array::from_fn(|j| (x[j] - self.mean[j]) / self.std[j])
    }

    pub fn mean(&self) -> &FeatureVector {
        &self.mean
    }

    pub fn std(&self) -> &FeatureVector {
        &self.std
    }
}

/// Whether k-NN standardizes features before measuring distance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Scaling {
    #[default]
    Standardized,
    Raw,
}

/// Labeled workers as `(vector, label)` pairs in worker id order.
pub fn training_samples(train: &[LabeledWorker]) -> Vec<(FeatureVector, DropoutLabel)> {
    let mut sorted: Vec<&LabeledWorker> = train.iter().collect();
    sorted.sort_by(|a, b| a.features.worker_id().cmp(b.features.worker_id()));
    sorted
        .into_iter()
        .map(|lw| (lw.features.vector(), lw.label))
        .collect()
}

fn squared_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    let mut d = 0.0;
    for j in 0..N_FEATURES {
        let diff = a[j] - b[j];
        d += diff * diff;
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    scaler: StandardScaler,
    points: Vec<(FeatureVector, DropoutLabel)>,
}

impl KnnModel {
    pub fn fit(train: &[LabeledWorker], k: usize, scaling: Scaling) -> Result<Self, ClassifyError> {
        Self::fit_vectors(&training_samples(train), k, scaling)
    }

    /// Fits on raw vectors, keeping their given order for tie breaks.
    pub fn fit_vectors(
        samples: &[(FeatureVector, DropoutLabel)],
        k: usize,
        scaling: Scaling,
    ) -> Result<Self, ClassifyError> {
        if samples.is_empty() {
            return Err(ClassifyError::EmptyTraining);
        }
        if k == 0 || k.is_multiple_of(2) {
            return Err(ClassifyError::InvalidK(k));
        }
        if k > samples.len() {
            return Err(ClassifyError::KTooLarge {
                k,
                n: samples.len(),
            });
        }
        let scaler = match scaling {
            Scaling::Standardized => {
                let raw: Vec<FeatureVector> = samples.iter().map(|s| s.0).collect();
                StandardScaler::fit(&raw)
            }
            Scaling::Raw => StandardScaler::identity(),
        };
        let points = samples
            .iter()
            .map(|(x, y)| (scaler.transform(x), *y))
            .collect();
        Ok(KnnModel { k, scaler, points })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scaler(&self) -> &StandardScaler {
        &self.scaler
    }

    /// Stored (transformed) training vectors with their labels.
    pub fn points(&self) -> &[(FeatureVector, DropoutLabel)] {
        &self.points
    }

    /// Indices of the `k` nearest stored points, nearest first.
    pub fn neighbors(&self, x: &FeatureVector) -> Vec<usize> {
        let q = self.scaler.transform(x);
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, (p, _)) in self.points.iter().enumerate() {
            let d = squared_distance(&q, p);
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            // earlier indices win ties, so insert after every equal distance
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_vector(&self, x: &FeatureVector) -> DropoutLabel {
        let dropouts = self
            .neighbors(x)
            .into_iter()
            .filter(|&i| self.points[i].1 == DropoutLabel::Dropout)
            .count();
        if 2 * dropouts > self.k {
            DropoutLabel::Dropout
        } else {
            DropoutLabel::Active
        }
    }

    pub fn predict(&self, x: &WorkerFeatures) -> DropoutLabel {
        self.predict_vector(&x.vector())
    }
}

fn class_index(label: DropoutLabel) -> usize {
    match label {
        DropoutLabel::Dropout => 0,
        DropoutLabel::Active => 1,
    }
}

/// Gaussian naive Bayes with population variances and a variance floor.
#[derive(Debug, Clone, PartialEq)]
pub struct GnbModel {
    priors: [f64; 2],
    means: [FeatureVector; 2],
    variances: [FeatureVector; 2],
    var_floor: f64,
}

impl GnbModel {
    /// Relative part of the variance floor.
    pub const VAR_SMOOTHING: f64 = 1e-9;
    /// Absolute lower bound of the variance floor.
    pub const MIN_VAR_FLOOR: f64 = 1e-12;

    pub fn fit(train: &[LabeledWorker]) -> Result<Self, ClassifyError> {
        Self::fit_vectors(&training_samples(train))
    }

    pub fn fit_vectors(samples: &[(FeatureVector, DropoutLabel)]) -> Result<Self, ClassifyError> {
        let Some(first) = samples.first() else {
            return Err(ClassifyError::EmptyTraining);
        };
        let mut counts = [0usize; 2];
        for (_, y) in samples {
            counts[class_index(*y)] += 1;
        }
        if counts.contains(&0) {
            return Err(ClassifyError::SingleClass(first.1));
        }

        let all: Vec<FeatureVector> = samples.iter().map(|s| s.0).collect();
        let pooled = population_variance(&all, &column_means(&all));
        let max_pooled = pooled.iter().copied().fold(0.0, f64::max);
        let var_floor = (Self::VAR_SMOOTHING * max_pooled).max(Self::MIN_VAR_FLOOR);

        let n = samples.len() as f64;
        let mut priors = [0.0; 2];
        let mut means = [[0.0; N_FEATURES]; 2];
        let mut variances = [[0.0; N_FEATURES]; 2];
        for c in 0..2 {
            let members: Vec<FeatureVector> = samples
                .iter()
                .filter(|s| class_index(s.1) == c)
                .map(|s| s.0)
                .collect();
            priors[c] = members.len() as f64 / n;
            means[c] = column_means(&members);
            variances[c] = population_variance(&members, &means[c]).map(|v| v.max(var_floor));
        }
        Ok(GnbModel {
            priors,
            means,
            variances,
            var_floor,
        })
    }

    /// Class priors as `[dropout, active]`.
    pub fn priors(&self) -> [f64; 2] {
        self.priors
    }

    pub fn means(&self, label: DropoutLabel) -> &FeatureVector {
        &self.means[class_index(label)]
    }

    pub fn variances(&self, label: DropoutLabel) -> &FeatureVector {
        &self.variances[class_index(label)]
    }

    pub fn var_floor(&self) -> f64 {
        self.var_floor
    }

    /// Log prior plus the summed per-feature log densities.
    pub fn log_score(&self, label: DropoutLabel, x: &FeatureVector) -> f64 {
        let c = class_index(label);
        let mut score = libm::log(self.priors[c]);
        for ((&xj, &mean), &var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            let diff = xj - mean;
            score -= 0.5 * libm::log(2.0 * PI * var) + diff * diff / (2.0 * var);
        }
        score
    }

    pub fn predict_vector(&self, x: &FeatureVector) -> DropoutLabel {
        let dropout = self.log_score(DropoutLabel::Dropout, x);
        let active = self.log_score(DropoutLabel::Active, x);
        if dropout >= active {
            DropoutLabel::Dropout
        } else {
            DropoutLabel::Active
        }
    }

    pub fn predict(&self, x: &WorkerFeatures) -> DropoutLabel {
        self.predict_vector(&x.vector())
    }
}

fn write_vector(f: &mut fmt::Formatter<'_>, name: &str, v: &FeatureVector) -> fmt::Result {
    writeln!(f, "{name:<10} {:>14.6} {:>14.6} {:>14.6}", v[0], v[1], v[2])
}

/// Diagnostic listing; not a stable format.
impl fmt::Display for StandardScaler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_vector(f, "mean", &self.mean)?;
        write_vector(f, "std", &self.std)
    }
}

impl fmt::Display for KnnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k-NN k={} over {} points", self.k, self.points.len())?;
        write!(f, "{}", self.scaler)
    }
}

impl fmt::Display for GnbModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gaussian naive bayes, variance floor {:e}",
            self.var_floor
        )?;
        for label in [DropoutLabel::Dropout, DropoutLabel::Active] {
            let c = class_index(label);
            writeln!(f, "{label}: prior {:.6}", self.priors[c])?;
            write_vector(f, "mean", &self.means[c])?;
            write_vector(f, "variance", &self.variances[c])?;
        }
        Ok(())
    }
}

fn column_means(points: &[FeatureVector]) -> FeatureVector {
    let n = points.len() as f64;
    core::array::from_fn(|j| points.iter().map(|p| p[j]).sum::<f64>() / n)
}

fn population_variance(points: &[FeatureVector], mean: &FeatureVector) -> FeatureVector {
    let n = points.len() as f64;
    core::array::from_fn(|j| {
        points
            .iter()
            .map(|p| (p[j] - mean[j]) * (p[j] - mean[j]))
            .sum::<f64>()
            / n
    })
}
