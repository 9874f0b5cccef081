//! Permutation Mantel tests and the adaptive min-P test.
//!
//! For a list of metric pairs `(K_m, H_m)` the adaptive test computes every
//! Mantel statistic `T_m⁽ᵇ⁾ = tr(K_m H_m⁽ᵇ⁾)` on one shared set of
//! permutations `b = 0..=B` (`b = 0` is the identity), converts each column
//! of statistics to permutation p-values
//!
//! ```text
//! P_m⁽ᵇ⁾ = #{b' : T_m⁽ᵇ'⁾ ≥ T_m⁽ᵇ⁾} / (B + 1)
//! ```
//!
//! and calibrates the observed minimum `P⁽⁰⁾ = min_m P_m⁽⁰⁾` against the
//! permutation distribution of the minimum:
//!
//! ```text
//! P_adaptive = #{b : min_m P_m⁽ᵇ⁾ ≤ P⁽⁰⁾} / (B + 1)
//! ```
//!
//! Permutation `b` acts on subject labels of the response: `H⁽ᵇ⁾_ij =
//! H_π(i)π(j)`, equivalently `Y⁽ᵇ⁾_i = Y_π(i)`. Whenever `H` is a multiple of
//! `Y Y^T` and `K` is spectral, the statistic is evaluated in the principal
//! basis as `c Σ_j w_j ‖(U^T P_b Y)_j‖²` at `O(n r q)` per permutation;
//! otherwise the `O(n²)` permuted trace is used.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AdamantError, Result};
use crate::matrices::{
    gram_from_decomposition, spectral_weight, thin_svd, FeatureMatrix, GramMatrix, KernelSpec,
    SpectralDecomposition, DEFAULT_RANK_TOLERANCE,
};
use crate::rng::substream;
use crate::score_stats::WeightVector;

/// Ridge penalties used for univariate responses in the power studies.
pub const UNIVARIATE_LAMBDA_GRID: [f64; 8] = [
    100.0,
    1e3,
    2.5e3,
    5e3,
    7.5e3,
    1e4,
    2.5e4,
    f64::INFINITY,
];

/// Penalties for both modalities in the EEG/SNP setting.
pub const EEG_LAMBDA_GRID: [f64; 3] = [10.0, 100.0, f64::INFINITY];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricPair {
    pub x_spec: KernelSpec,
    pub y_spec: KernelSpec,
    pub label: String,
}

impl MetricPair {
    /// Pair labelled `"<x kernel>|<y kernel>"`.
    pub fn new(x_spec: KernelSpec, y_spec: KernelSpec) -> Self {
        let label = format!("{x_spec}|{y_spec}");
        MetricPair {
            x_spec,
            y_spec,
            label,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Ridge kernels on `X` at each penalty, Euclidean similarity on `Y`.
pub fn ridge_metrics(lambdas: &[f64]) -> Result<Vec<MetricPair>> {
    lambdas
        .iter()
        .map(|&l| Ok(MetricPair::new(KernelSpec::ridge(l)?, KernelSpec::Euclidean)))
        .collect()
}

/// Every combination of a ridge kernel on `X` and one on `Y`.
pub fn ridge_grid(lambdas_x: &[f64], lambdas_y: &[f64]) -> Result<Vec<MetricPair>> {
    let mut out = Vec::with_capacity(lambdas_x.len() * lambdas_y.len());
    for &lx in lambdas_x {
        for &ly in lambdas_y {
            out.push(MetricPair::new(KernelSpec::ridge(lx)?, KernelSpec::ridge(ly)?));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    pub n: usize,
    pub permutations: usize,
    pub master_seed: u64,
}

impl PermutationPlan {
    pub fn new(n: usize, permutations: usize, master_seed: u64) -> Result<Self> {
        if permutations < 1 {
            return Err(AdamantError::Parameter(
                "at least one permutation is required".into(),
            ));
        }
        if n < 2 {
            return Err(AdamantError::Parameter(format!(
                "need at least 2 subjects, got {n}"
            )));
        }
        Ok(PermutationPlan {
            n,
            permutations,
            master_seed,
        })
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.n, self.permutations, self.master_seed).map(|_| ())
    }
}

/// Permutation `b` of `0..n`: the identity for `b = 0`, otherwise a
/// Fisher–Yates shuffle driven by stream `b` of the master seed.
pub fn permutation_indices(plan: &PermutationPlan, b: usize) -> Result<Vec<usize>> {
    if b > plan.permutations {
        return Err(AdamantError::Parameter(format!(
            "permutation index {b} exceeds B = {}",
            plan.permutations
        )));
    }
    let mut perm: Vec<usize> = (0..plan.n).collect();
    if b > 0 {
        perm.shuffle(&mut substream(plan.master_seed, b as u64));
    }
    Ok(perm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MantelOutcome {
    pub statistic: f64,
    pub p_value: f64,
    /// `T⁽ᵇ⁾` for `b = 0..=B`; entry 0 is the observed statistic.
    pub permuted: Vec<f64>,
}

impl MantelOutcome {
    fn from_statistics(permuted: Vec<f64>) -> Self {
        let hits = exceedances(&permuted)[0];
        MantelOutcome {
            statistic: permuted[0],
            p_value: hits as f64 / permuted.len() as f64,
            permuted,
        }
    }
}

/// Relative tolerance below which two permutation statistics count as tied.
///
/// Degenerate kernels (Mahalanobis with `p ≥ n`, ridge with a vanishing
/// penalty) give statistics that are constant up to rounding; comparing them
/// exactly would let rounding decide the p-value.
pub const TIE_TOLERANCE: f64 = 1.4901161193847656e-8;

/// `#{b' : T⁽ᵇ'⁾ ≥ T⁽ᵇ⁾ − τ max|T|}` for every `b`.
pub fn exceedances(stats: &[f64]) -> Vec<usize> {
    let scale = stats.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let tol = TIE_TOLERANCE * scale;
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    stats
        .iter()
        .map(|t| sorted.len() - sorted.partition_point(|v| *v < t - tol))
        .collect()
}

/// `Σ_ij K_ij H_π(i)π(j)`.
fn permuted_trace(k: &DMatrix<f64>, h: &DMatrix<f64>, perm: &[usize]) -> f64 {
    let mut total = 0.0;
    for (j, &pj) in perm.iter().enumerate() {
        let kc = k.column(j);
        let hc = h.column(pj);
        let mut s = 0.0;
        for (i, &pi) in perm.iter().enumerate() {
            s += kc[i] * hc[pi];
        }
        total += s;
    }
    total
}

fn permute_rows(y: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(y.nrows(), y.ncols(), |i, k| y[(perm[i], k)])
}

/// Mantel test of `tr(H K)` with rows and columns of `H` permuted together.
pub fn mantel_permutation_test(
    k: &GramMatrix,
    h: &GramMatrix,
    plan: &PermutationPlan,
) -> Result<MantelOutcome> {
    plan.validate()?;
    if k.n() != h.n() || k.n() != plan.n {
        return Err(AdamantError::Shape(format!(
            "K is {}x{}, H is {}x{}, plan has n = {}",
            k.n(),
            k.n(),
            h.n(),
            h.n(),
            plan.n
        )));
    }
    let stats = (0..=plan.permutations)
        .into_par_iter()
        .map(|b| {
            let perm = permutation_indices(plan, b)?;
            Ok(permuted_trace(k.data(), h.data(), &perm))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MantelOutcome::from_statistics(stats))
}

/// The same test for `H = Y Y^T` and `K = U diag(w) U^T`, evaluated as
/// `Σ_j w_j ‖(U^T P_b Y)_j‖²`.
pub fn mantel_permutation_test_zspace(
    decomp: &SpectralDecomposition,
    weights: &WeightVector,
    y: &FeatureMatrix,
    plan: &PermutationPlan,
) -> Result<MantelOutcome> {
    plan.validate()?;
    if decomp.n() != y.n() || y.n() != plan.n {
        return Err(AdamantError::Shape(format!(
            "decomposition has n = {}, response n = {}, plan n = {}",
            decomp.n(),
            y.n(),
            plan.n
        )));
    }
    if weights.len() != decomp.rank() {
        return Err(AdamantError::Shape(format!(
            "{} weights for rank {}",
            weights.len(),
            decomp.rank()
        )));
    }
    let stats = (0..=plan.permutations)
        .into_par_iter()
        .map(|b| {
            let perm = permutation_indices(plan, b)?;
            let z = decomp.u().tr_mul(&permute_rows(y.data(), &perm));
            Ok(weighted_energy(&z, weights.weights()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MantelOutcome::from_statistics(stats))
}

fn weighted_energy(z: &DMatrix<f64>, w: &[f64]) -> f64 {
    z.row_iter()
        .zip(w)
        .map(|(row, w)| w * row.norm_squared())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamantResult {
    per_metric: Vec<MetricResult>,
    min_p: f64,
    adaptive_p: f64,
    selected_metric: String,
    permutations: usize,
    master_seed: u64,
}

impl AdamantResult {
    /// Assembles a result; the minimum p-value and the selected metric (first
    /// label attaining it) are derived from `per_metric`.
    pub fn new(
        per_metric: Vec<MetricResult>,
        adaptive_p: f64,
        permutations: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let best = per_metric
            .iter()
            .min_by(|a, b| a.p_value.total_cmp(&b.p_value))
            .ok_or_else(|| AdamantError::Parameter("result needs at least one metric".into()))?;
        Ok(AdamantResult {
            min_p: best.p_value,
            selected_metric: best.label.clone(),
            per_metric,
            adaptive_p,
            permutations,
            master_seed,
        })
    }

    pub fn per_metric(&self) -> &[MetricResult] {
        &self.per_metric
    }

    pub fn min_p(&self) -> f64 {
        self.min_p
    }

    pub fn adaptive_p(&self) -> f64 {
        self.adaptive_p
    }

    pub fn selected_metric(&self) -> &str {
        &self.selected_metric
    }

    pub fn permutations(&self) -> usize {
        self.permutations
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn metric(&self, label: &str) -> Option<&MetricResult> {
        self.per_metric.iter().find(|m| m.label == label)
    }
}

/// Statistics `T_m⁽ᵇ⁾` for every metric and permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationTable {
    pub labels: Vec<String>,
    /// `stats[m][b]`, `b = 0` observed.
    pub stats: Vec<Vec<f64>>,
    pub plan: PermutationPlan,
}

impl PermutationTable {
    /// `#{b' : T_m⁽ᵇ'⁾ ≥ T_m⁽ᵇ⁾}` for every `b`, ties within
    /// [`TIE_TOLERANCE`].
    pub fn exceedance_counts(&self, m: usize) -> Vec<usize> {
        exceedances(&self.stats[m])
    }

    /// `P_m⁽ᵇ⁾` for every `b`.
    pub fn p_values(&self, m: usize) -> Vec<f64> {
        let denom = (self.plan.permutations + 1) as f64;
        self.exceedance_counts(m)
            .into_iter()
            .map(|c| c as f64 / denom)
            .collect()
    }

    pub fn summarize(&self) -> Result<AdamantResult> {
        let b_total = self.plan.permutations + 1;
        let counts: Vec<Vec<usize>> = (0..self.labels.len())
            .map(|m| self.exceedance_counts(m))
            .collect();
        let min_counts: Vec<usize> = (0..b_total)
            .map(|b| counts.iter().map(|c| c[b]).min().unwrap_or(b_total))
            .collect();
        let observed = min_counts[0];
        let hits = min_counts.iter().filter(|&&c| c <= observed).count();
        let per_metric = self
            .labels
            .iter()
            .zip(&self.stats)
            .zip(&counts)
            .map(|((label, stats), c)| MetricResult {
                label: label.clone(),
                statistic: stats[0],
                p_value: c[0] as f64 / b_total as f64,
            })
            .collect();
        AdamantResult::new(
            per_metric,
            hits as f64 / b_total as f64,
            self.plan.permutations,
            self.plan.master_seed,
        )
    }
}

enum Evaluator {
    /// `scale · Σ_j w_j ‖(U^T P Y)_j‖²`
    Principal { weights: Vec<f64>, scale: f64 },
    /// `tr(K P H P^T)` with `H` shared by index.
    Gram { k: DMatrix<f64>, h: usize },
}

/// Constant `c` with `H = c Y Y^T`, when the response kernel has that form.
fn response_scale(spec: &KernelSpec, y: &FeatureMatrix) -> Option<f64> {
    match spec {
        KernelSpec::Euclidean => Some(1.0),
        KernelSpec::Precomputed { .. } => None,
        _ if y.p() != 1 => None,
        KernelSpec::Mahalanobis => {
            let ss = y.data().norm_squared();
            (ss > 0.0).then(|| 1.0 / ss)
        }
        KernelSpec::Ridge { lambda } => Some(1.0 / (y.data().norm_squared() + lambda)),
    }
}

/// Runs the adaptive Mantel test.
///
/// `x` is column-centered and `y` standardized here if they are not already.
/// All metrics share the permutation plan.
pub fn adamant(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    metrics: &[MetricPair],
    plan: &PermutationPlan,
) -> Result<AdamantResult> {
    permutation_table(x, y, metrics, plan)?.summarize()
}

/// Every permuted statistic behind [`adamant`].
pub fn permutation_table(
    x: &FeatureMatrix,
    y: &FeatureMatrix,
    metrics: &[MetricPair],
    plan: &PermutationPlan,
) -> Result<PermutationTable> {
    plan.validate()?;
    if metrics.is_empty() {
        return Err(AdamantError::Parameter("no metric pairs given".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = metrics.iter().find(|m| !seen.insert(m.label.as_str())) {
        return Err(AdamantError::Parameter(format!(
            "duplicate metric label {:?}",
            dup.label
        )));
    }
    if x.n() != y.n() || x.n() != plan.n {
        return Err(AdamantError::Shape(format!(
            "X has {} subjects, Y has {}, plan has {}",
            x.n(),
            y.n(),
            plan.n
        )));
    }
    let x = x.clone().centered()?;
    let y = y.clone().standardized()?;
    let n = x.n();

    let x_decomp = if metrics.iter().any(|m| m.x_spec.is_spectral()) {
        Some(thin_svd(&x, DEFAULT_RANK_TOLERANCE)?)
    } else {
        None
    };
    let rank = x_decomp.as_ref().map_or(0, SpectralDecomposition::rank);
    let principal_capable = metrics
        .iter()
        .filter(|m| m.x_spec.is_spectral() && response_scale(&m.y_spec, &y).is_some())
        .count();
    let use_principal = principal_capable > 0 && rank * y.p() <= n * principal_capable;

    let mut y_decomp: Option<SpectralDecomposition> = None;
    let mut responses: Vec<(KernelSpec, DMatrix<f64>)> = Vec::new();
    let mut evaluators = Vec::with_capacity(metrics.len());
    for m in metrics {
        if use_principal && m.x_spec.is_spectral() {
            if let Some(scale) = response_scale(&m.y_spec, &y) {
                let d = x_decomp.as_ref().expect("spectral kernel has a decomposition");
                let lambda = m.x_spec.penalty().unwrap_or(f64::INFINITY);
                let weights = d
                    .eigenvalues()
                    .iter()
                    .map(|&e| spectral_weight(e, lambda))
                    .collect();
                evaluators.push(Evaluator::Principal { weights, scale });
                continue;
            }
        }
        let k = match (&m.x_spec, &x_decomp) {
            (KernelSpec::Precomputed { matrix }, _) => {
                GramMatrix::new(check_square(matrix, n)?.clone(), m.x_spec.clone())?
            }
            (spec, Some(d)) => gram_from_decomposition(d, spec)?,
            (_, None) => unreachable!("spectral kernel without decomposition"),
        };
        let h = match responses.iter().position(|(s, _)| *s == m.y_spec) {
            Some(idx) => idx,
            None => {
                let h = match &m.y_spec {
                    KernelSpec::Precomputed { matrix } => check_square(matrix, n)?.clone(),
                    spec => {
                        if y_decomp.is_none() {
                            y_decomp = Some(thin_svd(&y, DEFAULT_RANK_TOLERANCE)?);
                        }
                        gram_from_decomposition(y_decomp.as_ref().unwrap(), spec)?.data().clone()
                    }
                };
                responses.push((m.y_spec.clone(), h));
                responses.len() - 1
            }
        };
        evaluators.push(Evaluator::Gram {
            k: k.data().clone(),
            h,
        });
    }

    let needs_z = evaluators
        .iter()
        .any(|e| matches!(e, Evaluator::Principal { .. }));
    let columns = (0..=plan.permutations)
        .into_par_iter()
        .map(|b| {
            let perm = permutation_indices(plan, b)?;
            let z = if needs_z {
                let d = x_decomp.as_ref().expect("principal path has a decomposition");
                Some(d.u().tr_mul(&permute_rows(y.data(), &perm)))
            } else {
                None
            };
            Ok(evaluators
                .iter()
                .map(|e| match e {
                    Evaluator::Principal { weights, scale } => {
                        scale * weighted_energy(z.as_ref().unwrap(), weights)
                    }
                    Evaluator::Gram { k, h } => permuted_trace(k, &responses[*h].1, &perm),
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let stats = (0..metrics.len())
        .map(|m| columns.iter().map(|c| c[m]).collect())
        .collect();
    Ok(PermutationTable {
        labels: metrics.iter().map(|m| m.label.clone()).collect(),
        stats,
        plan: *plan,
    })
}

fn check_square(m: &DMatrix<f64>, n: usize) -> Result<&DMatrix<f64>> {
    if m.nrows() != n || m.ncols() != n {
        return Err(AdamantError::Shape(format!(
            "precomputed Gram is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}
