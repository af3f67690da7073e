//! The correlation family as one pencil.
//!
//! For centered sets `x_1..x_P` stacked into a `Q`-vector, every method solves
//! `(C - D) w = rho D w` where `D = blockdiag(x_i x_i^T)` and the off-diagonal
//! blocks of `C` are `x_k A x_m^T`. The methods differ only in `A` and in how
//! many sets they accept:
//!
//! | kind  | sets  | cross block         |
//! |-------|-------|---------------------|
//! | CCA   | 2     | `x_k x_m^T`         |
//! | MCCA  | >= 2  | `x_k x_m^T`         |
//! | DCCA  | 2     | `S_k S_m^T`         |
//! | DMCCA | >= 2  | `S_k S_m^T`         |
//!
//! where `S_i` holds per-class sums of set `i`, so `S_k S_m^T = x_k A x_m^T`
//! for the same-class indicator `A` without forming the `n × n` matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, center, CenteringStats, ClassSums, LabelVector, MultisetDataset};
use crate::error::{Error, Result};
use crate::gev::{solve_gev, GevProblem, GevSolution};

/// Eigenvalues at or below this fraction of the largest magnitude count as
/// non-positive.
pub const POSITIVE_TOLERANCE: f64 = 1e-10;

/// Below this quadratic form an eigenvector cannot be scaled to the
/// constraint and falls back to unit Euclidean norm.
pub const NORMALIZATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MethodKind {
    Cca,
    Mcca,
    Dcca,
    Dmcca,
    /// Plain concatenation of the raw sets; has no coupling pair.
    Serial,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Serial,
        MethodKind::Cca,
        MethodKind::Mcca,
        MethodKind::Dcca,
        MethodKind::Dmcca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Cca => "CCA",
            MethodKind::Mcca => "MCCA",
            MethodKind::Dcca => "DCCA",
            MethodKind::Dmcca => "DMCCA",
            MethodKind::Serial => "SERIAL",
        }
    }

    /// The cross term this kind uses, or `None` for serial fusion.
    pub fn cross_term(self) -> Option<CrossTerm> {
        match self {
            MethodKind::Cca | MethodKind::Mcca => Some(CrossTerm::Identity),
            MethodKind::Dcca | MethodKind::Dmcca => Some(CrossTerm::ClassIndicator),
            MethodKind::Serial => None,
        }
    }

    fn check_set_count(self, p: usize) -> Result<()> {
        let ok = match self {
            MethodKind::Cca | MethodKind::Dcca => p == 2,
            MethodKind::Mcca | MethodKind::Dmcca => p >= 2,
            MethodKind::Serial => p >= 1,
        };
        if ok {
            Ok(())
        } else {
            let need = match self {
                MethodKind::Cca | MethodKind::Dcca => "exactly 2 sets",
                _ => "at least 2 sets",
            };
            Err(Error::UnsupportedMethod {
                method: self.name().into(),
                reason: format!("needs {need}, got {p}"),
            })
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidData(format!("unknown method {s:?}")))
    }
}

/// How per-set projections are combined into one feature vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionStrategy {
    /// Elementwise sum of the `d`-dimensional projections (FFS-I).
    #[default]
    Sum,
    /// Vertical stack, `P * d` dimensions (FFS-II).
    Concat,
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" | "ffs1" | "ffs1_sum" => Ok(FusionStrategy::Sum),
            "concat" | "ffs2" | "ffs2_concat" => Ok(FusionStrategy::Concat),
            _ => Err(Error::InvalidData(format!("unknown fusion strategy {s:?}"))),
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionStrategy::Sum => "sum",
            FusionStrategy::Concat => "concat",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub fusion: FusionStrategy,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, fusion: FusionStrategy) -> Self {
        Self { kind, fusion }
    }
}

impl From<MethodKind> for MethodSpec {
    fn from(kind: MethodKind) -> Self {
        Self::new(kind, FusionStrategy::Sum)
    }
}

/// What sits between `x_k` and `x_m^T` in the off-diagonal blocks of `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossTerm {
    /// Same-class indicator, evaluated through class sums.
    ClassIndicator,
    /// `A = I`: plain cross-correlation.
    Identity,
}

/// The `(C, D)` pencil.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPair {
    pub c: DMatrix<f64>,
    /// Block diagonal of `c`.
    pub d: DMatrix<f64>,
    /// Start of each set's block, with `Q` appended.
    pub offsets: Vec<usize>,
}

impl CouplingPair {
    /// `C - D`: the cross blocks with zero diagonal blocks.
    pub fn lhs(&self) -> DMatrix<f64> {
        &self.c - &self.d
    }

    pub fn problem(&self) -> Result<GevProblem> {
        GevProblem::new(self.lhs(), self.d.clone())
    }

    pub fn order(&self) -> usize {
        self.c.nrows()
    }

    pub fn block(&self, k: usize, m: usize) -> DMatrix<f64> {
        let (r0, r1) = (self.offsets[k], self.offsets[k + 1]);
        let (c0, c1) = (self.offsets[m], self.offsets[m + 1]);
        self.c.view((r0, c0), (r1 - r0, c1 - c0)).into_owned()
    }
}

pub fn build_coupling(dataset: &MultisetDataset, method: &MethodSpec) -> Result<CouplingPair> {
    let cross = method
        .kind
        .cross_term()
        .ok_or_else(|| Error::UnsupportedMethod {
            method: method.kind.name().into(),
            reason: "serial fusion has no coupling pair".into(),
        })?;
    build_coupling_with(dataset, method.kind, cross)
}

/// [`build_coupling`] with an explicit cross term, so a discriminative kind
/// can be evaluated with `A = I`.
pub fn build_coupling_with(
    dataset: &MultisetDataset,
    kind: MethodKind,
    cross: CrossTerm,
) -> Result<CouplingPair> {
    if kind == MethodKind::Serial {
        return Err(Error::UnsupportedMethod {
            method: kind.name().into(),
            reason: "serial fusion has no coupling pair".into(),
        });
    }
    kind.check_set_count(dataset.set_count())?;
    if let Some((set, row, mean)) = dataset::centering_defect(dataset) {
        return Err(Error::NotCentered { set, row, mean });
    }
    if cross == CrossTerm::ClassIndicator {
        check_class_sizes(dataset.labels())?;
    }

    let offsets = dataset.offsets();
    let q = dataset.total_dim();
    let p = dataset.set_count();
    let mut c = DMatrix::zeros(q, q);
    let mut d = DMatrix::zeros(q, q);

    let sums = match cross {
        CrossTerm::ClassIndicator => Some(ClassSums::new(dataset)),
        CrossTerm::Identity => None,
    };

    for k in 0..p {
        let xk = dataset.set(k).values();
        let auto = xk * xk.transpose();
        let (o, m) = (offsets[k], xk.nrows());
        for j in 0..m {
            for i in 0..m {
                // mirror the upper triangle so the block is exactly symmetric
                let v = if i <= j { auto[(i, j)] } else { auto[(j, i)] };
                c[(o + i, o + j)] = v;
                d[(o + i, o + j)] = v;
            }
        }
        for (mm, &om) in offsets.iter().enumerate().take(p).skip(k + 1) {
            let block = match &sums {
                Some(s) => &s.sums[k] * s.sums[mm].transpose(),
                None => xk * dataset.set(mm).values().transpose(),
            };
            c.view_mut((o, om), block.shape()).copy_from(&block);
            c.view_mut((om, o), (block.ncols(), block.nrows()))
                .copy_from(&block.transpose());
        }
    }
    Ok(CouplingPair { c, d, offsets })
}

fn check_class_sizes(labels: &LabelVector) -> Result<()> {
    if let Some((class, &size)) = labels
        .class_sizes()
        .iter()
        .enumerate()
        .find(|(_, &s)| s == 1)
    {
        return Err(Error::TooFewClasses(format!(
            "class {class} has {size} sample; discriminative couplings need at least 2 per present class"
        )));
    }
    Ok(())
}

/// `min(c, m_1, ..., m_P)`.
pub fn predicted_dim_bound(dataset: &MultisetDataset) -> usize {
    dataset
        .dims()
        .into_iter()
        .fold(dataset.labels().class_count(), usize::min)
}

/// Fitted projections: one `m_i × d` block per set plus the training means.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    blocks: Vec<DMatrix<f64>>,
    eigenvalues: Vec<f64>,
    method: MethodSpec,
    centering: CenteringStats,
    d_max: usize,
    applied_sigma: f64,
    fallback: Vec<bool>,
}

impl ProjectionModel {
    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    /// Retained eigenvalues, non-increasing and all positive.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn d(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn method(&self) -> &MethodSpec {
        &self.method
    }

    pub fn centering(&self) -> &CenteringStats {
        &self.centering
    }

    pub fn applied_sigma(&self) -> f64 {
        self.applied_sigma
    }

    /// Per retained vector: true when it was too degenerate to meet the
    /// constraint and was scaled to unit norm instead.
    pub fn normalization_fallback(&self) -> &[bool] {
        &self.fallback
    }

    /// All blocks stacked into the `Q × d` matrix.
    pub fn stacked(&self) -> DMatrix<f64> {
        let q: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut out = DMatrix::zeros(q, self.d());
        let mut row = 0;
        for b in &self.blocks {
            out.view_mut((row, 0), b.shape()).copy_from(b);
            row += b.nrows();
        }
        out
    }

    /// The same model keeping only the leading `d` directions.
    pub fn truncated(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.d() {
            return Err(Error::NotEnoughPositive {
                requested: d,
                available: self.d(),
            });
        }
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| b.columns(0, d).into_owned())
                .collect(),
            eigenvalues: self.eigenvalues[..d].to_vec(),
            fallback: self.fallback[..d].to_vec(),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

/// On-disk form of a [`ProjectionModel`]; blocks are arrays of rows.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    method: MethodKind,
    fusion: FusionStrategy,
    d: usize,
    d_max: usize,
    eigenvalues: Vec<f64>,
    means: Vec<Vec<f64>>,
    blocks: Vec<Vec<Vec<f64>>>,
    applied_sigma: f64,
    normalization_fallback: Vec<bool>,
}

impl From<&ProjectionModel> for ModelDocument {
    fn from(m: &ProjectionModel) -> Self {
        Self {
            method: m.method.kind,
            fusion: m.method.fusion,
            d: m.d(),
            d_max: m.d_max,
            eigenvalues: m.eigenvalues.clone(),
            means: m
                .centering
                .means
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
            blocks: m
                .blocks
                .iter()
                .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            applied_sigma: m.applied_sigma,
            normalization_fallback: m.fallback.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for ProjectionModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let bad = |msg: String| Error::InvalidData(format!("model document: {msg}"));
        if doc.eigenvalues.len() != doc.d || doc.normalization_fallback.len() != doc.d {
            return Err(bad("eigenvalue count does not match d".into()));
        }
        if doc.blocks.len() != doc.means.len() {
            return Err(bad("one block and one mean vector per set expected".into()));
        }
        let blocks = doc
            .blocks
            .iter()
            .zip(&doc.means)
            .map(|(rows, mean)| {
                if rows.len() != mean.len() || rows.iter().any(|r| r.len() != doc.d) {
                    return Err(bad("block shape does not match means and d".into()));
                }
                Ok(DMatrix::from_fn(rows.len(), doc.d, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks,
            eigenvalues: doc.eigenvalues,
            method: MethodSpec::new(doc.method, doc.fusion),
            centering: CenteringStats {
                means: doc.means.into_iter().map(DVector::from_vec).collect(),
            },
            d_max: doc.d_max,
            applied_sigma: doc.applied_sigma,
            fallback: doc.normalization_fallback,
        })
    }
}

/// Every eigenpair of a fitted pencil, normalized and split per set.
///
/// Unlike [`ProjectionModel`] this keeps directions with non-positive
/// eigenvalues too, which is useful for looking at accuracy curves past the
/// point where the discriminative directions run out.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub blocks: Vec<DMatrix<f64>>,
    pub eigenvalues: Vec<f64>,
    pub positive_count: usize,
    pub d_max: usize,
    pub method: MethodSpec,
    pub centering: CenteringStats,
    pub fallback: Vec<bool>,
    pub solution: GevSolution,
    pub coupling: CouplingPair,
}

impl Spectrum {
    /// Projects a raw (uncentered) dataset onto the leading `d` directions.
    pub fn project(&self, dataset: &MultisetDataset, d: usize) -> Result<Vec<DMatrix<f64>>> {
        if d > self.eigenvalues.len() {
            return Err(Error::DimensionMismatch(format!(
                "asked for {d} directions out of {}",
                self.eigenvalues.len()
            )));
        }
        project_blocks(&self.blocks, &self.centering, dataset, d)
    }
}

/// Centers, builds the pencil, solves it and normalizes every eigenvector so
/// that `sum_k w_k^T x_k x_k^T w_k = P`.
pub fn fit_spectrum(dataset: &MultisetDataset, method: &MethodSpec) -> Result<Spectrum> {
    let cross = method
        .kind
        .cross_term()
        .ok_or_else(|| Error::UnsupportedMethod {
            method: method.kind.name().into(),
            reason: "serial fusion is not fitted".into(),
        })?;
    fit_spectrum_with(dataset, method, cross)
}

/// [`fit_spectrum`] with an explicit cross term.
pub fn fit_spectrum_with(
    dataset: &MultisetDataset,
    method: &MethodSpec,
    cross: CrossTerm,
) -> Result<Spectrum> {
    method.kind.check_set_count(dataset.set_count())?;
    if dataset.labels().present_classes() < 2 {
        return Err(Error::TooFewClasses(format!(
            "{} class(es) present; fitting needs at least 2",
            dataset.labels().present_classes()
        )));
    }
    let (centered, centering) = center(dataset);
    let coupling = build_coupling_with(&centered, method.kind, cross)?;
    let solution = solve_gev(&coupling.problem()?)?;

    let scale = solution
        .eigenvalues
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let positive_count = solution
        .eigenvalues
        .iter()
        .take_while(|&&rho| rho > POSITIVE_TOLERANCE * scale)
        .count();

    let p = dataset.set_count() as f64;
    let mut vectors = solution.eigenvectors.clone();
    let mut fallback = Vec::with_capacity(vectors.ncols());
    for mut w in vectors.column_iter_mut() {
        let quad = w.dot(&(&coupling.d * &w));
        if quad < NORMALIZATION_FLOOR {
            let n = w.norm();
            w /= n;
            fallback.push(true);
        } else {
            w *= (p / quad).sqrt();
            fallback.push(false);
        }
    }

    let offsets = &coupling.offsets;
    let blocks = (0..dataset.set_count())
        .map(|i| {
            vectors
                .rows(offsets[i], offsets[i + 1] - offsets[i])
                .into_owned()
        })
        .collect();

    Ok(Spectrum {
        blocks,
        eigenvalues: solution.eigenvalues.clone(),
        positive_count,
        d_max: predicted_dim_bound(dataset),
        method: *method,
        centering,
        fallback,
        solution,
        coupling,
    })
}

/// Fits a projection model, keeping the leading `d` directions with positive
/// eigenvalue. Without an explicit `d`, keeps `min(d_max, #positive)`.
pub fn fit(
    dataset: &MultisetDataset,
    method: &MethodSpec,
    d: Option<usize>,
) -> Result<ProjectionModel> {
    let spectrum = fit_spectrum(dataset, method)?;
    model_from_spectrum(&spectrum, d)
}

/// [`fit`] with an explicit cross term, e.g. DMCCA evaluated with `A = I`.
pub fn fit_with(
    dataset: &MultisetDataset,
    method: &MethodSpec,
    cross: CrossTerm,
    d: Option<usize>,
) -> Result<ProjectionModel> {
    let spectrum = fit_spectrum_with(dataset, method, cross)?;
    model_from_spectrum(&spectrum, d)
}

pub fn model_from_spectrum(spectrum: &Spectrum, d: Option<usize>) -> Result<ProjectionModel> {
    let d_max = spectrum.d_max;
    let available = spectrum.positive_count;
    let d = match d {
        Some(0) => {
            return Err(Error::InvalidData(
                "projection dimension must be positive".into(),
            ))
        }
        Some(d) if d > d_max => {
            return Err(Error::DimensionAboveBound {
                requested: d,
                bound: d_max,
            })
        }
        Some(d) if d > available => {
            return Err(Error::NotEnoughPositive {
                requested: d,
                available,
            })
        }
        Some(d) => d,
        None if available == 0 => {
            return Err(Error::NotEnoughPositive {
                requested: 1,
                available: 0,
            })
        }
        None => d_max.min(available),
    };
    debug_assert!(d <= d_max);
    Ok(ProjectionModel {
        blocks: spectrum
            .blocks
            .iter()
            .map(|b| b.columns(0, d).into_owned())
            .collect(),
        eigenvalues: spectrum.eigenvalues[..d].to_vec(),
        method: spectrum.method,
        centering: spectrum.centering.clone(),
        d_max,
        applied_sigma: spectrum.solution.applied_sigma,
        fallback: spectrum.fallback[..d].to_vec(),
    })
}

fn project_blocks(
    blocks: &[DMatrix<f64>],
    centering: &CenteringStats,
    dataset: &MultisetDataset,
    d: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if dataset.set_count() != blocks.len() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} sets, dataset has {}",
            blocks.len(),
            dataset.set_count()
        )));
    }
    let centered = dataset::apply_centering(centering, dataset)?;
    centered
        .sets()
        .iter()
        .zip(blocks)
        .enumerate()
        .map(|(i, (x, w))| {
            if x.dim() != w.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "set {i} has {} features, model expects {}",
                    x.dim(),
                    w.nrows()
                )));
            }
            Ok(w.columns(0, d).transpose() * x.values())
        })
        .collect()
}

/// `Y_i = w_i^T (x_i - mean_i)` for every set; each `Y_i` is `d × n`.
pub fn project(model: &ProjectionModel, dataset: &MultisetDataset) -> Result<Vec<DMatrix<f64>>> {
    project_blocks(&model.blocks, &model.centering, dataset, model.d())
}

/// Fused features (one column per sample) with the labels they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedFeatures {
    pub values: DMatrix<f64>,
    pub labels: LabelVector,
}

pub fn fuse(
    projected: &[DMatrix<f64>],
    strategy: FusionStrategy,
    labels: &LabelVector,
) -> Result<FusedFeatures> {
    let first = projected.first().ok_or(Error::Empty("nothing to fuse"))?;
    let shape = first.shape();
    if let Some(i) = projected.iter().position(|y| y.shape() != shape) {
        return Err(Error::DimensionMismatch(format!(
            "projection {i} is {:?}, projection 0 is {shape:?}",
            projected[i].shape()
        )));
    }
    if labels.len() != shape.1 {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            shape.1
        )));
    }
    let values = match strategy {
        FusionStrategy::Sum => {
            let mut acc = first.clone();
            for y in &projected[1..] {
                acc += y;
            }
            acc
        }
        FusionStrategy::Concat => stack_rows(projected),
    };
    Ok(FusedFeatures {
        values,
        labels: labels.clone(),
    })
}

fn stack_rows(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let cols = parts.first().map_or(0, |p| p.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), p.shape()).copy_from(p);
        r += p.nrows();
    }
    out
}

/// Concatenates the sets as given (no projection, no centering).
pub fn serial_fuse(dataset: &MultisetDataset) -> FusedFeatures {
    let parts: Vec<DMatrix<f64>> = dataset.sets().iter().map(|s| s.values().clone()).collect();
    FusedFeatures {
        values: stack_rows(&parts),
        labels: dataset.labels().clone(),
    }
}
