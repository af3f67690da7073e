//! Seeded synthetic multiset data with class structure and a shared nuisance
//! signal.
//!
//! Sample `j` of set `i` is `mu_{i, l} + shared * W_i z_j + noise * e`, where
//! `l = j mod c`, `mu_{i, l} ~ N(0, separation^2 I)`, `W_i` is a fixed random
//! loading shared by all samples, `z_j ~ N(0, I)` is drawn once per sample and
//! reused across sets, and `e ~ N(0, I)` is independent everywhere.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureMatrix, LabelVector, MultisetDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Feature dimension of each set; its length is `P`.
    pub dims: Vec<usize>,
    pub classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Standard deviation of the class means.
    pub separation: f64,
    /// Scale of the latent signal common to all sets.
    pub shared_strength: f64,
    /// Dimension of that latent signal.
    pub latent_dim: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dims: vec![20, 20, 30],
            classes: 6,
            n_train: 300,
            n_test: 120,
            separation: 0.35,
            shared_strength: 1.0,
            latent_dim: 3,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidData(
                "every set needs a positive dimension".into(),
            ));
        }
        if self.classes < 2 {
            return Err(Error::InvalidData("need at least 2 classes".into()));
        }
        if self.n_train == 0 || self.n_test == 0 || self.latent_dim == 0 {
            return Err(Error::InvalidData(
                "sample counts and latent dimension must be positive".into(),
            ));
        }
        for (name, v) in [
            ("separation", self.separation),
            ("shared_strength", self.shared_strength),
            ("noise", self.noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        scale * rng.sample::<f64, _>(StandardNormal)
    })
}

/// Generates `(train, test)` deterministically from `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<(MultisetDataset, MultisetDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means: Vec<DMatrix<f64>> = spec
        .dims
        .iter()
        .map(|&m| gaussian(&mut rng, m, spec.classes, spec.separation))
        .collect();
    let loadings: Vec<DMatrix<f64>> = spec
        .dims
        .iter()
        .map(|&m| {
            gaussian(
                &mut rng,
                m,
                spec.latent_dim,
                1.0 / (spec.latent_dim as f64).sqrt(),
            )
        })
        .collect();

    let mut draw = |n: usize| -> Result<MultisetDataset> {
        let labels: Vec<usize> = (0..n).map(|j| j % spec.classes).collect();
        let latent = gaussian(&mut rng, spec.latent_dim, n, 1.0);
        let sets = spec
            .dims
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let mut x = gaussian(&mut rng, m, n, spec.noise);
                x += &loadings[i] * &latent * spec.shared_strength;
                for (j, mut col) in x.column_iter_mut().enumerate() {
                    col += means[i].column(labels[j]);
                }
                FeatureMatrix::new(x, i)
            })
            .collect::<Result<Vec<_>>>()?;
        MultisetDataset::new(sets, LabelVector::new(labels, spec.classes)?)
    };
    let train = draw(spec.n_train)?;
    let test = draw(spec.n_test)?;
    Ok((train, test))
}
