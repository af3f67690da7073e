//! Multiset canonical correlation fusion.
//!
//! CCA, MCCA, DCCA and the discriminative multiset variant (DMCCA) are all
//! expressed as one symmetric-definite generalized eigenvalue problem
//! `(C - D) w = rho D w` over stacked feature sets. On top of that this crate
//! provides the data model, feature extractors for digit images, projection and
//! fusion, and a nearest-neighbour recognition pipeline.

pub mod cca;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod features;
pub mod gev;
pub mod synth;

pub use cca::{
    build_coupling, build_coupling_with, fit, fit_spectrum, fit_with, fuse, predicted_dim_bound,
    project, serial_fuse, CouplingPair, CrossTerm, FusedFeatures, FusionStrategy, MethodKind,
    MethodSpec, ProjectionModel, Spectrum,
};
pub use classify::{
    evaluate_accuracy, nn_classify, sweep_dimensions, sweep_spectrum, NullDirections, SweepEntry,
    SweepResult,
};
pub use dataset::{
    apply_centering, build_indicator_dense, center, class_sums, CenteringStats, ClassSums,
    FeatureMatrix, LabelVector, MultisetDataset,
};
pub use error::{Error, Result};
pub use gev::{
    oracle_gev, residuals, solve_gev, GevProblem, GevSolution, OracleSpectrum, RegularizationPolicy,
};
pub use synth::{generate as generate_synthetic, SyntheticSpec};
