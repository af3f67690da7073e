//! Multiset sample data: feature sets sharing one label vector, centering,
//! and the class-indicator algebra used by the discriminative couplings.
//!
//! Feature sets are stored features × samples, so sample `j` of set `i` is
//! column `j` of `sets[i]`.

mod idx;
mod table;

pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use table::{load_feature_table, parse_feature_table, write_feature_table, FeatureTableFormat};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Upper bound on `n` for [`build_indicator_dense`].
pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Relative tolerance on row sums used to decide whether data is centered.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

/// One feature set: `m` features by `n` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    set_id: usize,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, set_id: usize) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Empty(
                "feature matrix needs at least one feature and one sample",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { values, set_id })
    }

    /// Builds a feature matrix from per-sample rows (samples × features).
    pub fn from_sample_rows(rows: &[Vec<f64>], set_id: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged sample rows".into()));
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| rows[j][i]), set_id)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn set_id(&self) -> usize {
        self.set_id
    }

    /// Number of features `m`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples `n`.
    pub fn samples(&self) -> usize {
        self.values.ncols()
    }
}

/// Class labels in `[0, class_count)`, one per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    class_count: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if class_count == 0 {
            return Err(Error::InvalidData("class count must be positive".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::InvalidData(format!(
                "label {l} at sample {i} is outside [0, {class_count})"
            )));
        }
        Ok(Self {
            labels,
            class_count,
        })
    }

    /// Infers the class count as `max label + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let c = labels.iter().max().map_or(1, |&m| m + 1);
        Self::new(labels, c)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Samples per class, indexed by class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Number of classes with at least one sample.
    pub fn present_classes(&self) -> usize {
        self.class_sizes().iter().filter(|&&s| s > 0).count()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// Indices of the first `per_class` samples of every class, in sample order.
    pub fn first_per_class(&self, per_class: usize) -> Vec<usize> {
        let mut taken = vec![0; self.class_count];
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| {
                if taken[l] < per_class {
                    taken[l] += 1;
                    Some(i)
                } else {
                    None
                }
            })
            .collect()
    }
}

/// `P` feature sets over the same samples, with one shared label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisetDataset {
    sets: Vec<FeatureMatrix>,
    labels: LabelVector,
}

impl MultisetDataset {
    /// Fitting needs `P >= 2`; single-set datasets are allowed here so the
    /// same type carries single-feature baselines.
    pub fn new(sets: Vec<FeatureMatrix>, labels: LabelVector) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::Empty("dataset has no feature sets"));
        };
        let n = first.samples();
        if let Some(bad) = sets.iter().position(|s| s.samples() != n) {
            return Err(Error::DimensionMismatch(format!(
                "set {bad} has {} samples, set 0 has {n}",
                sets[bad].samples()
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} samples",
                labels.len()
            )));
        }
        Ok(Self { sets, labels })
    }

    pub fn sets(&self) -> &[FeatureMatrix] {
        &self.sets
    }

    pub fn set(&self, i: usize) -> &FeatureMatrix {
        &self.sets[i]
    }

    pub fn labels(&self) -> &LabelVector {
        &self.labels
    }

    /// `P`.
    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    /// `n`.
    pub fn samples(&self) -> usize {
        self.sets[0].samples()
    }

    /// `(m_1, ..., m_P)`.
    pub fn dims(&self) -> Vec<usize> {
        self.sets.iter().map(FeatureMatrix::dim).collect()
    }

    /// `Q = m_1 + ... + m_P`.
    pub fn total_dim(&self) -> usize {
        self.sets.iter().map(FeatureMatrix::dim).sum()
    }

    /// Start row of each set inside the stacked `Q`-vector, plus `Q` at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sets.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &self.sets {
            acc += s.dim();
            offsets.push(acc);
        }
        offsets
    }

    /// Keeps only the listed sets, in the given order.
    pub fn select_sets(&self, which: &[usize]) -> Result<Self> {
        let sets = which
            .iter()
            .map(|&i| {
                self.sets.get(i).cloned().ok_or_else(|| {
                    Error::DimensionMismatch(format!("set {i} out of {}", self.sets.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sets, self.labels.clone())
    }

    /// Keeps the listed samples (columns) in every set.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let sets = self
            .sets
            .iter()
            .map(|s| {
                let v = s.values();
                FeatureMatrix::new(
                    DMatrix::from_fn(v.nrows(), indices.len(), |r, j| v[(r, indices[j])]),
                    s.set_id(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sets, self.labels.subset(indices))
    }
}

/// Per-set means subtracted by [`center`].
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringStats {
    pub means: Vec<DVector<f64>>,
}

impl CenteringStats {
    /// All-zero means matching the dataset's set dimensions.
    pub fn zeros(dims: &[usize]) -> Self {
        Self {
            means: dims.iter().map(|&m| DVector::zeros(m)).collect(),
        }
    }
}

/// Subtracts each feature row's mean in every set.
///
/// A second pass removes the rounding residue of the first, so centered rows
/// sum to zero at the level of machine precision times the row's absolute sum.
pub fn center(dataset: &MultisetDataset) -> (MultisetDataset, CenteringStats) {
    let mut means = Vec::with_capacity(dataset.set_count());
    let mut sets = Vec::with_capacity(dataset.set_count());
    for s in dataset.sets() {
        let mut values = s.values().clone();
        let n = values.ncols() as f64;
        let mut mean = DVector::zeros(values.nrows());
        for _pass in 0..2 {
            for (r, mut row) in values.row_iter_mut().enumerate() {
                let mu = row.sum() / n;
                row.add_scalar_mut(-mu);
                mean[r] += mu;
            }
        }
        means.push(mean);
        sets.push(FeatureMatrix {
            values,
            set_id: s.set_id(),
        });
    }
    (
        MultisetDataset {
            sets,
            labels: dataset.labels.clone(),
        },
        CenteringStats { means },
    )
}

/// Subtracts stored training means from another dataset.
pub fn apply_centering(
    stats: &CenteringStats,
    dataset: &MultisetDataset,
) -> Result<MultisetDataset> {
    if stats.means.len() != dataset.set_count() {
        return Err(Error::DimensionMismatch(format!(
            "centering stats for {} sets applied to {} sets",
            stats.means.len(),
            dataset.set_count()
        )));
    }
    let sets = dataset
        .sets()
        .iter()
        .zip(&stats.means)
        .enumerate()
        .map(|(i, (s, mean))| {
            if mean.len() != s.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "set {i}: mean has {} entries, set has {} features",
                    mean.len(),
                    s.dim()
                )));
            }
            let mut values = s.values().clone();
            for mut col in values.column_iter_mut() {
                col -= mean;
            }
            Ok(FeatureMatrix {
                values,
                set_id: s.set_id(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultisetDataset::new(sets, dataset.labels.clone())
}

/// First (set, row, mean) whose row sum exceeds the centering tolerance.
pub fn centering_defect(dataset: &MultisetDataset) -> Option<(usize, usize, f64)> {
    for (i, s) in dataset.sets().iter().enumerate() {
        let n = s.samples() as f64;
        for (r, row) in s.values().row_iter().enumerate() {
            let sum = row.sum();
            let scale = row.iter().map(|v| v.abs()).sum::<f64>();
            if sum.abs() > CENTERING_TOLERANCE * scale {
                return Some((i, r, sum / n));
            }
        }
    }
    None
}

/// `S = x E` where column `l` of `E` indicates class `l`: each column of the
/// result is the sum of the samples of that class. Empty classes give zeros.
pub fn class_sums(x: &FeatureMatrix, labels: &LabelVector) -> Result<DMatrix<f64>> {
    if labels.len() != x.samples() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            x.samples()
        )));
    }
    let mut sums = DMatrix::zeros(x.dim(), labels.class_count());
    for (col, &l) in x.values().column_iter().zip(labels.labels()) {
        let mut target = sums.column_mut(l);
        target += col;
    }
    Ok(sums)
}

/// Class sums for every set of a dataset.
///
/// `x_k A x_m^T = S_k S_m^T`, so cross-set class-weighted correlations never
/// need the `n × n` indicator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSums {
    pub sums: Vec<DMatrix<f64>>,
}

impl ClassSums {
    pub fn new(dataset: &MultisetDataset) -> Self {
        let sums = dataset
            .sets()
            .iter()
            .map(|s| class_sums(s, dataset.labels()).expect("dataset invariant: labels match n"))
            .collect();
        Self { sums }
    }
}

/// Dense `n × n` same-class indicator `A[u, v] = 1` iff `labels[u] == labels[v]`.
/// Only meant for small oracle checks.
pub fn build_indicator_dense(labels: &LabelVector, cap: usize) -> Result<DMatrix<f64>> {
    let n = labels.len();
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let l = labels.labels();
    Ok(DMatrix::from_fn(
        n,
        n,
        |u, v| if l[u] == l[v] { 1.0 } else { 0.0 },
    ))
}
