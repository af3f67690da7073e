//! 1-nearest-neighbour recognition over fused features and accuracy sweeps
//! over the projection dimension.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::{
    fit, fit_spectrum, fuse, predicted_dim_bound, project, serial_fuse, MethodKind, MethodSpec,
};
use crate::dataset::{apply_centering, center, MultisetDataset};
use crate::error::{Error, Result};

/// Label of the nearest training column (squared Euclidean distance) for each
/// test column. Ties go to the smallest training index.
pub fn nn_classify(
    train: &DMatrix<f64>,
    train_labels: &[usize],
    test: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train.ncols() == 0 {
        return Err(Error::Empty("training set"));
    }
    if train_labels.len() != train.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} training samples",
            train_labels.len(),
            train.ncols()
        )));
    }
    if train.nrows() != test.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "training features have {} dimensions, test features {}",
            train.nrows(),
            test.nrows()
        )));
    }
    let dim = train.nrows();
    let train_data = train.as_slice();
    let test_data = test.as_slice();
    let predictions = (0..test.ncols())
        .into_par_iter()
        .map(|j| {
            let probe = &test_data[j * dim..(j + 1) * dim];
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (i, cand) in train_data.chunks_exact(dim.max(1)).enumerate() {
                let mut dist = 0.0;
                for (a, b) in probe.iter().zip(cand) {
                    let diff = a - b;
                    dist += diff * diff;
                }
                if dist < best_dist {
                    best_dist = dist;
                    best = i;
                }
            }
            train_labels[best]
        })
        .collect();
    Ok(predictions)
}

/// Fraction of positions where `predicted` matches `truth`.
pub fn evaluate_accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::Empty("prediction list"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub d: usize,
    pub accuracy: f64,
}

/// Accuracy as a function of the projection dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: MethodSpec,
    /// One entry per requested `d`, ascending.
    pub entries: Vec<SweepEntry>,
    /// Smallest `d` attaining `best_accuracy`.
    pub best_d: usize,
    pub best_accuracy: f64,
    pub d_max: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepSummary {
    method: MethodKind,
    best_d: usize,
    best_accuracy: f64,
    d_max: usize,
}

impl SweepResult {
    fn from_entries(method: MethodSpec, entries: Vec<SweepEntry>, d_max: usize) -> Result<Self> {
        let mut best: Option<SweepEntry> = None;
        for e in &entries {
            if best.is_none_or(|b| e.accuracy > b.accuracy) {
                best = Some(*e);
            }
        }
        let best = best.ok_or(Error::Empty("dimension range"))?;
        Ok(Self {
            method,
            entries,
            best_d: best.d,
            best_accuracy: best.accuracy,
            d_max,
        })
    }

    /// `d,accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,accuracy\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.d, e.accuracy));
        }
        out
    }

    /// `{method, best_d, best_accuracy, d_max}`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SweepSummary {
            method: self.method.kind,
            best_d: self.best_d,
            best_accuracy: self.best_accuracy,
            d_max: self.d_max,
        })?)
    }
}

fn normalize_range(range: &[usize]) -> Result<Vec<usize>> {
    let mut ds = range.to_vec();
    ds.sort_unstable();
    ds.dedup();
    if ds.is_empty() {
        return Err(Error::Empty("dimension range"));
    }
    if ds[0] == 0 {
        return Err(Error::InvalidData(
            "projection dimension must be positive".into(),
        ));
    }
    Ok(ds)
}

/// Accuracy for each `d` using the leading `d` rows of full projections.
fn accuracy_curve(
    train_proj: &[DMatrix<f64>],
    test_proj: &[DMatrix<f64>],
    train: &MultisetDataset,
    test: &MultisetDataset,
    method: &MethodSpec,
    ds: &[usize],
) -> Result<Vec<SweepEntry>> {
    let leading = |ys: &[DMatrix<f64>], d: usize| -> Vec<DMatrix<f64>> {
        ys.iter().map(|y| y.rows(0, d).into_owned()).collect()
    };
    ds.iter()
        .map(|&d| {
            let tr = fuse(&leading(train_proj, d), method.fusion, train.labels())?;
            let te = fuse(&leading(test_proj, d), method.fusion, test.labels())?;
            let predicted = nn_classify(&tr.values, tr.labels.labels(), &te.values)?;
            Ok(SweepEntry {
                d,
                accuracy: evaluate_accuracy(&predicted, test.labels().labels())?,
            })
        })
        .collect()
}

/// Fits once on `train` and reports test accuracy for every `d` in the range
/// (default `1..=d`, where `d` is the fitted default dimension).
///
/// Leading eigenvectors do not depend on how many are kept, so truncating the
/// single fit gives the same curve as refitting at each `d`. Serial fusion has
/// no dimension to sweep and yields one entry at `d = Q`.
pub fn sweep_dimensions(
    train: &MultisetDataset,
    test: &MultisetDataset,
    method: &MethodSpec,
    d_range: Option<&[usize]>,
) -> Result<SweepResult> {
    if method.kind == MethodKind::Serial {
        let (tr, stats) = center(train);
        let te = apply_centering(&stats, test)?;
        let tr = serial_fuse(&tr);
        let te = serial_fuse(&te);
        let predicted = nn_classify(&tr.values, tr.labels.labels(), &te.values)?;
        let accuracy = evaluate_accuracy(&predicted, test.labels().labels())?;
        let entry = SweepEntry {
            d: train.total_dim(),
            accuracy,
        };
        return SweepResult::from_entries(*method, vec![entry], predicted_dim_bound(train));
    }

    let ds = match d_range {
        Some(r) => normalize_range(r)?,
        None => Vec::new(),
    };
    let top = ds.last().copied();
    let model = match top {
        // fit at the largest requested d so bound and positivity errors surface
        Some(d) => fit(train, method, Some(d))?,
        None => fit(train, method, None)?,
    };
    let ds = if ds.is_empty() {
        (1..=model.d()).collect()
    } else {
        ds
    };
    let train_proj = project(&model, train)?;
    let test_proj = project(&model, test)?;
    let entries = accuracy_curve(&train_proj, &test_proj, train, test, method, &ds)?;
    SweepResult::from_entries(*method, entries, model.d_max())
}

/// What the spectrum sweep does with directions whose eigenvalue is not
/// positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullDirections {
    /// Use the solver's eigenvectors as returned. Inside the (degenerate) null
    /// space their order and orientation are arbitrary.
    #[default]
    Keep,
    /// Treat them as zero projections: they add nothing to the fused features,
    /// so the curve stays flat once the positive directions run out.
    Zero,
}

/// Like [`sweep_dimensions`] but over the whole eigen-spectrum (default
/// `1..=Q`), not just the positive directions.
///
/// This is the exploratory view: it shows where accuracy peaks when nothing
/// stops the curve at the predicted bound.
pub fn sweep_spectrum(
    train: &MultisetDataset,
    test: &MultisetDataset,
    method: &MethodSpec,
    d_range: Option<&[usize]>,
    null: NullDirections,
) -> Result<SweepResult> {
    let spectrum = fit_spectrum(train, method)?;
    let q = spectrum.eigenvalues.len();
    let ds = match d_range {
        Some(r) => normalize_range(r)?,
        None => (1..=q).collect(),
    };
    let top = *ds.last().expect("range is non-empty");
    if top > q {
        return Err(Error::DimensionMismatch(format!(
            "asked for {top} directions out of {q}"
        )));
    }
    let mut train_proj = spectrum.project(train, top)?;
    let mut test_proj = spectrum.project(test, top)?;
    if null == NullDirections::Zero && spectrum.positive_count < top {
        let k = spectrum.positive_count;
        for y in train_proj.iter_mut().chain(test_proj.iter_mut()) {
            y.rows_mut(k, top - k).fill(0.0);
        }
    }
    let entries = accuracy_curve(&train_proj, &test_proj, train, test, method, &ds)?;
    SweepResult::from_entries(*method, entries, spectrum.d_max)
}
