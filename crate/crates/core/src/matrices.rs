//! Feature matrices, the thin SVD, and weighted-Euclidean Gram matrices.
//!
//! Every similarity used by the Mantel statistics here is a weighted inner
//! product `K = X W X^T`. With the thin SVD `X = U D V^T` and `η_j = d_j²`
//! all of them are diagonal in the principal directions:
//!
//! | kernel        | `W`                 | Gram                          |
//! |---------------|---------------------|-------------------------------|
//! | Euclidean     | `I_p`               | `U diag(η) U^T = X X^T`       |
//! | Mahalanobis   | `(X^T X)^-`         | `U U^T`                       |
//! | Ridge(λ)      | `(X^T X + λ I)^-1`  | `U diag(η / (η + λ)) U^T`     |
//!
//! The ridge Gram is stored without the leading factor `λ`. Permutation
//! p-values do not change under positive rescaling of `K`, and the unscaled
//! form equals the Mahalanobis Gram exactly at `λ = 0`. Raw statistic values
//! reported for ridge kernels therefore use `tr(H X (X^T X + λ I)^-1 X^T)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AdamantError, Result};

/// Default relative cutoff on singular values, `d_j > tol · d_1`.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-10;

/// `Strategy::Auto` uses the subject-space ridge formula once `p > 4n`.
pub const SUBJECT_SPACE_RATIO: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PreprocessWarning {
    /// Column had zero variance and was left as all zeros.
    ConstantColumn { column: usize },
    /// A Gram matrix was rescaled to `tr(G) = n` by more than 1%.
    TraceRescaled { factor: f64 },
}

impl fmt::Display for PreprocessWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessWarning::ConstantColumn { column } => {
                write!(f, "column {column} is constant; left as zeros")
            }
            PreprocessWarning::TraceRescaled { factor } => {
                write!(f, "Gram matrix rescaled by {factor} to reach tr(G) = n")
            }
        }
    }
}

/// An `n × p` matrix of subjects by features together with its
/// preprocessing state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
    centered: bool,
    standardized: bool,
    names: Option<Vec<String>>,
    warnings: Vec<PreprocessWarning>,
}

impl FeatureMatrix {
    /// Wraps raw data after checking `n ≥ 2`, `p ≥ 1` and finiteness.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        validate_raw(&data)?;
        Ok(FeatureMatrix {
            data,
            centered: false,
            standardized: false,
            names: None,
            warnings: Vec::new(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(AdamantError::Shape(format!(
                "row {i} has {} entries, expected {p}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Marks `data` as already centered without touching it.
    ///
    /// Used for hand-built fixtures such as `diag(2, 1)` whose columns are
    /// not literally mean-zero but whose decomposition is known.
    pub fn assume_centered(data: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::new(data)?;
        m.centered = true;
        Ok(m)
    }

    /// Like [`FeatureMatrix::assume_centered`] but also flags unit variance.
    pub fn assume_standardized(data: DMatrix<f64>) -> Result<Self> {
        let mut m = Self::assume_centered(data)?;
        m.standardized = true;
        Ok(m)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(AdamantError::Shape(format!(
                "{} column names for {} columns",
                names.len(),
                self.p()
            )));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn warnings(&self) -> &[PreprocessWarning] {
        &self.warnings
    }

    /// Centered copy; a no-op when already centered.
    pub fn centered(self) -> Result<Self> {
        if self.centered {
            return Ok(self);
        }
        let names = self.names.clone();
        let mut out = center_columns(&self.data)?;
        out.names = names;
        Ok(out)
    }

    /// Standardized copy; a no-op when already standardized.
    pub fn standardized(self) -> Result<Self> {
        if self.standardized {
            return Ok(self);
        }
        let names = self.names.clone();
        let mut out = standardize_columns(&self.data)?;
        out.names = names;
        Ok(out)
    }
}

fn validate_raw(data: &DMatrix<f64>) -> Result<()> {
    if data.nrows() < 2 {
        return Err(AdamantError::Input(format!(
            "need at least 2 subjects, got {}",
            data.nrows()
        )));
    }
    if data.ncols() < 1 {
        return Err(AdamantError::Input("need at least 1 feature".into()));
    }
    if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
        let (i, j) = (idx % data.nrows(), idx / data.nrows());
        return Err(AdamantError::Input(format!(
            "non-finite entry at row {i}, column {j}"
        )));
    }
    Ok(())
}

/// Subtracts each column mean.
pub fn center_columns(x: &DMatrix<f64>) -> Result<FeatureMatrix> {
    validate_raw(x)?;
    let mut data = x.clone();
    for mut col in data.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(FeatureMatrix {
        data,
        centered: true,
        standardized: false,
        names: None,
        warnings: Vec::new(),
    })
}

/// Centers each column and scales it to unit variance with divisor `n`, so a
/// standardized univariate response has `‖y‖² = n`.
///
/// Constant columns are left as zeros and reported through
/// [`FeatureMatrix::warnings`].
pub fn standardize_columns(x: &DMatrix<f64>) -> Result<FeatureMatrix> {
    let mut out = center_columns(x)?;
    let n = out.n() as f64;
    for (j, mut col) in out.data.column_iter_mut().enumerate() {
        let scale = x.column(j).amax();
        let var = col.norm_squared() / n;
        if var.sqrt() <= 1e-12 * scale || var == 0.0 {
            col.fill(0.0);
            out.warnings.push(PreprocessWarning::ConstantColumn { column: j });
        } else {
            col /= var.sqrt();
        }
    }
    out.standardized = true;
    Ok(out)
}

/// Thin SVD `X = U D V^T` truncated to the numerical rank.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    singular_values: Vec<f64>,
    eigenvalues: Vec<f64>,
    rank_tolerance: f64,
}

impl SpectralDecomposition {
    /// `n × r` matrix of principal directions.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// `p × r` right singular vectors.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `η_j = d_j²`, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// `U diag(w) U^T`.
    pub fn weighted_projection(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
            col *= w;
        }
        let mut k = scaled * self.u.transpose();
        symmetrize(&mut k);
        k
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.singular_values));
        &self.u * d * self.v.transpose()
    }
}

pub fn thin_svd(x: &FeatureMatrix, rank_tolerance: f64) -> Result<SpectralDecomposition> {
    if !x.is_centered() {
        return Err(AdamantError::NotCentered);
    }
    if !(0.0..1.0).contains(&rank_tolerance) {
        return Err(AdamantError::Parameter(format!(
            "rank tolerance must lie in [0, 1), got {rank_tolerance}"
        )));
    }
    let data = x.data();
    let (n, p) = (data.nrows(), data.ncols());
    // nalgebra's bidiagonal SVD can return a wrong factorization for some
    // wide rank-deficient inputs, so the decomposition goes through faer.
    let svd = faer::Mat::from_fn(n, p, |i, j| data[(i, j)])
        .thin_svd()
        .map_err(|_| AdamantError::Degenerate("SVD did not converge".into()))?;
    let d: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let d1 = d.iter().copied().fold(0.0_f64, f64::max);
    if d1 == 0.0 {
        return Err(AdamantError::RankZero);
    }
    let rank = d.iter().take_while(|&&s| s > rank_tolerance * d1).count();
    if rank == 0 {
        return Err(AdamantError::RankZero);
    }
    let singular_values: Vec<f64> = d.iter().take(rank).copied().collect();
    let eigenvalues = singular_values.iter().map(|s| s * s).collect();
    let (u, v) = (svd.U(), svd.V());
    Ok(SpectralDecomposition {
        u: DMatrix::from_fn(n, rank, |i, j| u[(i, j)]),
        v: DMatrix::from_fn(p, rank, |i, j| v[(i, j)]),
        singular_values,
        eigenvalues,
        rank_tolerance,
    })
}

/// A similarity recipe for one modality.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Euclidean,
    Mahalanobis,
    /// Finite positive penalty; build through [`KernelSpec::ridge`].
    Ridge { lambda: f64 },
    Precomputed { matrix: DMatrix<f64> },
}

impl KernelSpec {
    /// Ridge kernel with the endpoint aliases `λ = 0 → Mahalanobis` and
    /// `λ = ∞ → Euclidean`.
    pub fn ridge(lambda: f64) -> Result<Self> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(AdamantError::Parameter(format!(
                "ridge penalty must be in [0, inf], got {lambda}"
            )));
        }
        Ok(if lambda == 0.0 {
            KernelSpec::Mahalanobis
        } else if lambda.is_infinite() {
            KernelSpec::Euclidean
        } else {
            KernelSpec::Ridge { lambda }
        })
    }

    pub fn precomputed(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(AdamantError::Shape(format!(
                "precomputed Gram is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_symmetric(&matrix)?;
        Ok(KernelSpec::Precomputed { matrix })
    }

    /// Penalty on `[0, ∞]` for the spectral kernels, `None` for precomputed.
    pub fn penalty(&self) -> Option<f64> {
        match self {
            KernelSpec::Euclidean => Some(f64::INFINITY),
            KernelSpec::Mahalanobis => Some(0.0),
            KernelSpec::Ridge { lambda } => Some(*lambda),
            KernelSpec::Precomputed { .. } => None,
        }
    }

    pub fn is_spectral(&self) -> bool {
        self.penalty().is_some()
    }

    fn validate(&self) -> Result<()> {
        if let KernelSpec::Ridge { lambda } = self {
            if !(lambda.is_finite() && *lambda > 0.0) {
                return Err(AdamantError::Parameter(format!(
                    "ridge penalty must be finite and positive, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Euclidean => f.write_str("euclidean"),
            KernelSpec::Mahalanobis => f.write_str("mahalanobis"),
            KernelSpec::Ridge { lambda } => write!(f, "ridge({lambda})"),
            KernelSpec::Precomputed { .. } => f.write_str("precomputed"),
        }
    }
}

/// Weight of principal direction `j` in the scale-normalized spectral form.
///
/// `λ = 0` gives 1, `λ = ∞` gives `η` (the limit of `λ η / (η + λ)`), and any
/// finite positive `λ` gives `η / (η + λ)`.
pub fn spectral_weight(eta: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else if lambda.is_infinite() {
        eta
    } else {
        eta / (eta + lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Auto,
    FeatureSpace,
    SubjectSpace,
}

impl Strategy {
    pub fn resolve(self, n: usize, p: usize) -> Strategy {
        match self {
            Strategy::Auto if p > SUBJECT_SPACE_RATIO * n => Strategy::SubjectSpace,
            Strategy::Auto => Strategy::FeatureSpace,
            s => s,
        }
    }
}

/// A realized `n × n` symmetric similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    data: DMatrix<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    pub fn new(data: DMatrix<f64>, spec: KernelSpec) -> Result<Self> {
        if !data.is_square() {
            return Err(AdamantError::Shape(format!(
                "Gram matrix is {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        check_symmetric(&data)?;
        Ok(GramMatrix { data, spec })
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    /// `tr(A B)` for symmetric `A`, `B`, i.e. the entrywise inner product.
    pub fn trace_product(&self, other: &GramMatrix) -> f64 {
        self.data.dot(&other.data)
    }

    /// Smallest and largest eigenvalue.
    pub fn eigen_range(&self) -> (f64, f64) {
        let ev = self.data.clone().symmetric_eigenvalues();
        (ev.min(), ev.max())
    }

    pub fn scaled(&self, factor: f64) -> GramMatrix {
        GramMatrix {
            data: &self.data * factor,
            spec: self.spec.clone(),
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-8 * scale {
                return Err(AdamantError::Input(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Builds the Gram matrix of `x` under `spec`.
///
/// Ridge Grams use `X (X^T X + λ I)^-1 X^T` in feature space or
/// `(X X^T + λ I)^-1 X X^T` in subject space; the two agree through the push-through
/// identity `X (X^T X + λ I)^-1 = (X X^T + λ I)^-1 X`. The Mahalanobis Gram
/// goes through the thin SVD so rank-deficient designs use the projection
/// onto the column space.
pub fn gram(x: &FeatureMatrix, spec: &KernelSpec, strategy: Strategy) -> Result<GramMatrix> {
    if !x.is_centered() {
        return Err(AdamantError::NotCentered);
    }
    spec.validate()?;
    let data = x.data();
    let (n, p) = (x.n(), x.p());
    let k = match spec {
        KernelSpec::Euclidean => data * data.transpose(),
        KernelSpec::Mahalanobis => {
            let decomp = thin_svd(x, DEFAULT_RANK_TOLERANCE)?;
            decomp.weighted_projection(&vec![1.0; decomp.rank()])
        }
        KernelSpec::Ridge { lambda } => match strategy.resolve(n, p) {
            Strategy::SubjectSpace => {
                let xxt = data * data.transpose();
                let mut reg = xxt.clone();
                for i in 0..n {
                    reg[(i, i)] += lambda;
                }
                let chol = reg.cholesky().ok_or_else(|| {
                    AdamantError::Degenerate("X X^T + λI is not positive definite".into())
                })?;
                let mut k = chol.solve(&xxt);
                symmetrize(&mut k);
                k
            }
            _ => {
                let mut reg = data.transpose() * data;
                for i in 0..p {
                    reg[(i, i)] += lambda;
                }
                let chol = reg.cholesky().ok_or_else(|| {
                    AdamantError::Degenerate("X^T X + λI is not positive definite".into())
                })?;
                let solved = chol.solve(&data.transpose());
                let mut k = data * solved;
                symmetrize(&mut k);
                k
            }
        },
        KernelSpec::Precomputed { matrix } => {
            if matrix.nrows() != n || matrix.ncols() != n {
                return Err(AdamantError::Shape(format!(
                    "precomputed Gram is {}x{}, expected {n}x{n}",
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            matrix.clone()
        }
    };
    GramMatrix::new(k, spec.clone())
}

/// Gram matrix of a spectral kernel assembled from an existing SVD.
pub fn gram_from_decomposition(
    decomp: &SpectralDecomposition,
    spec: &KernelSpec,
) -> Result<GramMatrix> {
    spec.validate()?;
    let lambda = spec.penalty().ok_or_else(|| {
        AdamantError::Parameter("precomputed kernels have no spectral form".into())
    })?;
    let weights: Vec<f64> = decomp
        .eigenvalues()
        .iter()
        .map(|&eta| spectral_weight(eta, lambda))
        .collect();
    GramMatrix::new(decomp.weighted_projection(&weights), spec.clone())
}
