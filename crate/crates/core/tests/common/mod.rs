#![allow(dead_code)]

use dmcca::{center, FeatureMatrix, LabelVector, MultisetDataset};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random labels covering every class at least twice.
pub fn labels(rng: &mut ChaCha8Rng, n: usize, c: usize) -> LabelVector {
    assert!(n >= 2 * c);
    let mut l: Vec<usize> = (0..n)
        .map(|j| {
            if j < 2 * c {
                j % c
            } else {
                rng.random_range(0..c)
            }
        })
        .collect();
    // shuffle so classes are not contiguous
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        l.swap(i, j);
    }
    LabelVector::new(l, c).unwrap()
}

pub fn dataset(seed: u64, dims: &[usize], n: usize, c: usize) -> MultisetDataset {
    let mut r = rng(seed);
    let sets = dims
        .iter()
        .enumerate()
        .map(|(i, &m)| FeatureMatrix::new(gaussian(&mut r, m, n), i).unwrap())
        .collect();
    let l = labels(&mut r, n, c);
    MultisetDataset::new(sets, l).unwrap()
}

pub fn centered(seed: u64, dims: &[usize], n: usize, c: usize) -> MultisetDataset {
    center(&dataset(seed, dims, n, c)).0
}

/// Random symmetric `L` and symmetric positive definite `R` of order `q`.
pub fn symmetric_pair(seed: u64, q: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let a = gaussian(&mut r, q, q);
    let l = (&a + a.transpose()) * 0.5;
    let b = gaussian(&mut r, q, q + 5);
    let rhs = &b * b.transpose() / (q as f64) + DMatrix::identity(q, q) * 0.1;
    (l, (&rhs + rhs.transpose()) * 0.5)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
