//! Experiment harness: feature extraction from IDX digits, synthetic data,
//! method comparison runs and dimension sweeps. Every output file is written
//! atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dmcca::dataset::{load_feature_table, load_idx, write_feature_table, FeatureTableFormat};
use dmcca::features::{zernike_features, GaborBank, GaborBankSpec, Image, ZernikeSpec};
use dmcca::{
    generate_synthetic, sweep_dimensions, sweep_spectrum, FeatureMatrix, FusionStrategy,
    LabelVector, MethodKind, MethodSpec, MultisetDataset, NullDirections, SweepResult,
    SyntheticSpec,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_PER_CLASS: usize = 150;

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn table_bytes(x: &FeatureMatrix, labels: &LabelVector) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_feature_table(&mut buf, x, labels, false)?;
    Ok(buf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxSource {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    /// Samples kept per class, taken in file order.
    #[serde(default = "default_per_class")]
    pub per_class_train: usize,
    #[serde(default = "default_per_class")]
    pub per_class_test: usize,
}

fn default_per_class() -> usize {
    DEFAULT_PER_CLASS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<MethodKind>,
    /// One feature table per set.
    #[serde(default)]
    pub train: Vec<PathBuf>,
    #[serde(default)]
    pub test: Vec<PathBuf>,
    /// Digits to run the three image feature extractors on, instead of tables.
    #[serde(default)]
    pub idx: Option<IdxSource>,
    #[serde(default)]
    pub d_range: Option<Vec<usize>>,
    #[serde(default)]
    pub fusion: FusionStrategy,
    pub out: PathBuf,
    /// Only consumed by synthetic generation; nothing else in a run is random.
    #[serde(default)]
    pub seed: u64,
    /// Also report 1-NN accuracy of each set on its own.
    #[serde(default)]
    pub baselines: bool,
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.train
            .iter_mut()
            .chain(cfg.test.iter_mut())
            .for_each(fix);
        fix(&mut cfg.out);
        if let Some(idx) = cfg.idx.as_mut() {
            for p in [
                &mut idx.train_images,
                &mut idx.train_labels,
                &mut idx.test_images,
                &mut idx.test_labels,
            ] {
                fix(p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.methods.is_empty(), "config lists no methods");
        match &self.idx {
            Some(idx) => {
                ensure!(
                    self.train.is_empty() && self.test.is_empty(),
                    "config gives both feature tables and IDX files"
                );
                ensure!(
                    idx.per_class_train > 0 && idx.per_class_test > 0,
                    "per-class counts must be positive"
                );
                for p in [
                    &idx.train_images,
                    &idx.train_labels,
                    &idx.test_images,
                    &idx.test_labels,
                ] {
                    ensure!(p.exists(), "{} does not exist", p.display());
                }
            }
            None => {
                ensure!(!self.train.is_empty(), "config gives no training tables");
                ensure!(
                    self.train.len() == self.test.len(),
                    "{} training tables but {} test tables",
                    self.train.len(),
                    self.test.len()
                );
                for p in self.train.iter().chain(&self.test) {
                    ensure!(p.exists(), "{} does not exist", p.display());
                }
            }
        }
        if let Some(r) = &self.d_range {
            ensure!(
                !r.is_empty() && !r.contains(&0),
                "d_range must hold positive dimensions"
            );
        }
        Ok(())
    }
}

/// The three digit feature sets: Gabor magnitude means, Gabor magnitude
/// standard deviations and Zernike moment magnitudes, one row per image.
pub struct DigitFeatures {
    pub gabor_mean: Vec<Vec<f64>>,
    pub gabor_std: Vec<Vec<f64>>,
    pub zernike: Vec<Vec<f64>>,
}

pub fn extract_digit_features(images: &[Image]) -> Result<DigitFeatures> {
    let bank = GaborBank::new(GaborBankSpec::default())?;
    let zspec = ZernikeSpec::default();
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = images
        .par_iter()
        .map(|img| {
            let (mean, std) = bank.mean_and_std(img);
            (mean, std, zernike_features(img, &zspec))
        })
        .collect();
    let mut out = DigitFeatures {
        gabor_mean: Vec::with_capacity(rows.len()),
        gabor_std: Vec::with_capacity(rows.len()),
        zernike: Vec::with_capacity(rows.len()),
    };
    for (m, s, z) in rows {
        out.gabor_mean.push(m);
        out.gabor_std.push(s);
        out.zernike.push(z);
    }
    Ok(out)
}

impl DigitFeatures {
    pub fn into_dataset(self, labels: LabelVector) -> Result<MultisetDataset> {
        let sets = [self.gabor_mean, self.gabor_std, self.zernike]
            .iter()
            .enumerate()
            .map(|(i, rows)| FeatureMatrix::from_sample_rows(rows, i))
            .collect::<dmcca::Result<Vec<_>>>()?;
        Ok(MultisetDataset::new(sets, labels)?)
    }
}

/// Loads IDX digits, keeping the first `per_class` samples of each class when
/// asked to.
pub fn load_digits(
    images: &Path,
    labels: &Path,
    per_class: Option<usize>,
) -> Result<(Vec<Image>, LabelVector)> {
    let (images, labels) = load_idx(images, labels)?;
    Ok(match per_class {
        Some(k) => {
            let keep = labels.first_per_class(k);
            (
                keep.iter().map(|&j| images[j].clone()).collect(),
                labels.subset(&keep),
            )
        }
        None => (images, labels),
    })
}

pub fn idx_dataset(
    images: &Path,
    labels: &Path,
    per_class: Option<usize>,
) -> Result<MultisetDataset> {
    let (images, labels) = load_digits(images, labels, per_class)?;
    extract_digit_features(&images)?.into_dataset(labels)
}

/// Writes `<prefix>_gabor_mean.csv`, `<prefix>_gabor_std.csv` and
/// `<prefix>_zernike.csv` and returns their paths.
pub fn cmd_extract(
    images: &Path,
    labels: &Path,
    prefix: &Path,
    per_class: Option<usize>,
) -> Result<Vec<PathBuf>> {
    let ds = idx_dataset(images, labels, per_class).context("extracting digit features")?;
    let mut written = Vec::new();
    for (i, name) in ["gabor_mean", "gabor_std", "zernike"].iter().enumerate() {
        let path = suffixed(prefix, &format!("_{name}.csv"));
        write_atomic(&path, &table_bytes(ds.set(i), ds.labels())?)?;
        written.push(path);
    }
    Ok(written)
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Paths of the tables written by [`cmd_synth`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

/// Writes `train_<i>.csv` and `test_<i>.csv` for every set into `out`.
pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<SynthOutput> {
    let (train, test) = generate_synthetic(spec).context("generating synthetic data")?;
    let mut written = SynthOutput {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (tag, ds, list) in [
        ("train", &train, &mut written.train),
        ("test", &test, &mut written.test),
    ] {
        for i in 0..ds.set_count() {
            let path = out.join(format!("{tag}_{i}.csv"));
            write_atomic(&path, &table_bytes(ds.set(i), ds.labels())?)?;
            list.push(path);
        }
    }
    Ok(written)
}

fn load_tables(paths: &[PathBuf]) -> Result<(Vec<FeatureMatrix>, Vec<usize>)> {
    let mut sets = Vec::new();
    let mut labels: Option<Vec<usize>> = None;
    for (i, path) in paths.iter().enumerate() {
        let fmt = FeatureTableFormat {
            class_count: None,
            set_id: i,
        };
        let (x, l) = load_feature_table(path, &fmt)?;
        match &labels {
            None => labels = Some(l.labels().to_vec()),
            Some(prev) if prev.as_slice() != l.labels() => {
                bail!(
                    "labels in {} differ from those in {}",
                    path.display(),
                    paths[0].display()
                )
            }
            Some(_) => {}
        }
        sets.push(x);
    }
    Ok((sets, labels.unwrap_or_default()))
}

/// Loads train and test datasets, sharing one class count across both.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(MultisetDataset, MultisetDataset)> {
    if let Some(idx) = &cfg.idx {
        let train = idx_dataset(
            &idx.train_images,
            &idx.train_labels,
            Some(idx.per_class_train),
        )
        .context("loading training digits")?;
        let test = idx_dataset(&idx.test_images, &idx.test_labels, Some(idx.per_class_test))
            .context("loading test digits")?;
        return Ok((train, test));
    }
    let (train_sets, train_labels) = load_tables(&cfg.train).context("loading training tables")?;
    let (test_sets, test_labels) = load_tables(&cfg.test).context("loading test tables")?;
    let c = train_labels
        .iter()
        .chain(&test_labels)
        .max()
        .map_or(0, |&m| m + 1);
    let train = MultisetDataset::new(train_sets, LabelVector::new(train_labels, c)?)
        .context("assembling training data")?;
    let test = MultisetDataset::new(test_sets, LabelVector::new(test_labels, c)?)
        .context("assembling test data")?;
    ensure!(
        train.dims() == test.dims(),
        "training dimensions {:?} differ from test dimensions {:?}",
        train.dims(),
        test.dims()
    );
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub sweeps: Vec<SweepResult>,
    /// 1-NN accuracy of each set alone, when requested.
    pub baselines: Option<Vec<f64>>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn comparison_csv(&self) -> String {
        let mut out = String::from("method,best_d,best_accuracy,d_max\n");
        for s in &self.sweeps {
            out.push_str(&format!(
                "{},{},{},{}\n",
                s.method.kind, s.best_d, s.best_accuracy, s.d_max
            ));
        }
        out
    }
}

/// Single-set 1-NN accuracies on centered raw features.
pub fn single_set_accuracies(train: &MultisetDataset, test: &MultisetDataset) -> Result<Vec<f64>> {
    (0..train.set_count())
        .map(|i| {
            let tr = train.select_sets(&[i])?;
            let te = test.select_sets(&[i])?;
            Ok(sweep_dimensions(&tr, &te, &MethodKind::Serial.into(), None)?.best_accuracy)
        })
        .collect()
}

fn run_with(cfg: &ExperimentConfig, spectrum: bool) -> Result<RunReport> {
    cfg.validate()?;
    let (train, test) = load_datasets(cfg)?;
    let mut report = RunReport {
        sweeps: Vec::new(),
        baselines: None,
        files: Vec::new(),
    };
    for &kind in &cfg.methods {
        let method = MethodSpec::new(kind, cfg.fusion);
        log::info!("sweeping {kind}");
        let sweep = sweep_dimensions(&train, &test, &method, cfg.d_range.as_deref())
            .with_context(|| format!("sweeping {kind}"))?;
        let csv = cfg.out.join(format!("sweep_{kind}.csv"));
        write_atomic(&csv, sweep.to_csv().as_bytes())?;
        let summary = cfg.out.join(format!("summary_{kind}.json"));
        write_atomic(&summary, format!("{}\n", sweep.summary_json()?).as_bytes())?;
        report.files.extend([csv, summary]);
        if spectrum && kind != MethodKind::Serial {
            let curve = sweep_spectrum(&train, &test, &method, None, NullDirections::Keep)
                .with_context(|| format!("sweeping the full {kind} spectrum"))?;
            let path = cfg.out.join(format!("spectrum_{kind}.csv"));
            write_atomic(&path, curve.to_csv().as_bytes())?;
            report.files.push(path);
        }
        report.sweeps.push(sweep);
    }
    let comparison = cfg.out.join("comparison.csv");
    write_atomic(&comparison, report.comparison_csv().as_bytes())?;
    report.files.push(comparison);

    if cfg.baselines {
        let acc = single_set_accuracies(&train, &test).context("single-set baselines")?;
        let mut text = String::from("set,accuracy\n");
        for (i, a) in acc.iter().enumerate() {
            text.push_str(&format!("{i},{a}\n"));
        }
        let path = cfg.out.join("baselines.csv");
        write_atomic(&path, text.as_bytes())?;
        report.files.push(path);
        report.baselines = Some(acc);
    }
    Ok(report)
}

/// Fits, sweeps and evaluates every configured method. Writes
/// `sweep_<METHOD>.csv`, `summary_<METHOD>.json`, `comparison.csv` and, when
/// asked, `baselines.csv`.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_with(cfg, false)
}

/// [`cmd_run`] plus `spectrum_<METHOD>.csv`: accuracy over every eigenvector,
/// past the positive part of the spectrum.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<RunReport> {
    run_with(cfg, true)
}

/// Command-line values that replace the config file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub methods: Vec<MethodKind>,
    pub d_max: Option<usize>,
    pub fusion: Option<FusionStrategy>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
}

/// Builds the effective config: the file (if any), then the overrides.
pub fn resolve_config(file: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match file {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            methods: Vec::new(),
            train: Vec::new(),
            test: Vec::new(),
            idx: None,
            d_range: None,
            fusion: FusionStrategy::default(),
            out: PathBuf::from("results"),
            seed: 0,
            baselines: false,
        },
    };
    if !o.methods.is_empty() {
        cfg.methods = o.methods.clone();
    }
    if let Some(k) = o.d_max {
        ensure!(k > 0, "--d-max must be positive");
        cfg.d_range = Some((1..=k).collect());
    }
    if let Some(f) = o.fusion {
        cfg.fusion = f;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = &o.out {
        cfg.out = out.clone();
    }
    if !o.train.is_empty() || !o.test.is_empty() {
        cfg.train = o.train.clone();
        cfg.test = o.test.clone();
        cfg.idx = None;
    }
    Ok(cfg)
}

/// Reads a synthetic spec file (or the default spec) and applies `--seed`.
pub fn resolve_synth_spec(file: Option<&Path>, seed: Option<u64>) -> Result<SyntheticSpec> {
    let mut spec = match file {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading spec {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing spec {}", p.display()))?
        }
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}
