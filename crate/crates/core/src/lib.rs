//! Adaptive Mantel testing for two high-dimensional feature sets.
//!
//! The crate is organized around the principal-correlation view of kernel
//! association tests: with `X = U D V^T` and `Z = U^T Y`, the fixed effects,
//! ridge and variance components score statistics are weighted norms of `Z`
//! and equal Mantel statistics `tr(H K)` for Mahalanobis, ridge and Euclidean
//! similarity of subjects.
//!
//! * [`matrices`]: preprocessing, thin SVD, Gram matrices
//! * [`score_stats`]: score statistics, matrix correlation, analytic nulls
//! * [`engine`]: permutation Mantel tests and the adaptive min-P test
//! * [`heritability`]: moment estimator of variance explained
//! * [`simgen`]: synthetic designs, responses and EEG/SNP data
//! * [`spectral`]: DFT cross-spectra and band coherence features
//! * [`study`]: replicated power and size studies
//! * [`files`]: CSV matrices, EEG trial files, JSON results
//! * [`cli`]: the `adamant` command line

pub mod cli;
pub mod engine;
pub mod error;
pub mod files;
pub mod heritability;
pub mod matrices;
pub mod rng;
pub mod score_stats;
pub mod simgen;
pub mod spectral;
pub mod study;

pub use engine::{
    adamant, mantel_permutation_test, permutation_indices, AdamantResult, MetricPair,
    PermutationPlan,
};
pub use error::{AdamantError, Result};
pub use matrices::{gram, thin_svd, FeatureMatrix, GramMatrix, KernelSpec, Strategy};
