//! Score statistics in the principal-correlation basis.
//!
//! With `Z = U^T Y`, the fixed effects, ridge and variance components score
//! statistics are all weighted norms `Σ_j w_j Σ_k Z_jk²`:
//!
//! * `λ = 0`   (Mahalanobis kernel): `w_j = 1`
//! * `0 < λ < ∞` (ridge kernel):     `w_j = η_j / (η_j + λ)`
//! * `λ = ∞`   (Euclidean kernel):   `w_j = η_j`
//!
//! and each one equals the Mantel trace `tr(H K)` for `H = Y Y^T` and the
//! matching Gram matrix from [`crate::matrices`].

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::error::{AdamantError, Result};
use crate::matrices::{spectral_weight, FeatureMatrix, GramMatrix, SpectralDecomposition};
use crate::rng::substream;

/// `Z = U^T Y`, an `r × q` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalCorrelations {
    z: DMatrix<f64>,
}

impl PrincipalCorrelations {
    pub fn from_matrix(z: DMatrix<f64>) -> Self {
        PrincipalCorrelations { z }
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn rank(&self) -> usize {
        self.z.nrows()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// `Σ_k Z_jk²` for each principal direction `j`.
    pub fn row_energy(&self) -> Vec<f64> {
        self.z.row_iter().map(|r| r.norm_squared()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
    lambda: f64,
}

impl WeightVector {
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatValue {
    pub value: f64,
    pub weights: WeightVector,
}

pub fn principal_correlations(
    decomp: &SpectralDecomposition,
    y: &FeatureMatrix,
) -> Result<PrincipalCorrelations> {
    if decomp.n() != y.n() {
        return Err(AdamantError::Shape(format!(
            "decomposition has {} subjects, response has {}",
            decomp.n(),
            y.n()
        )));
    }
    Ok(PrincipalCorrelations {
        z: decomp.u().tr_mul(y.data()),
    })
}

pub fn ridge_weights(eigenvalues: &[f64], lambda: f64) -> Result<WeightVector> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(AdamantError::Parameter(format!(
            "ridge penalty must be in [0, inf], got {lambda}"
        )));
    }
    if let Some(bad) = eigenvalues.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(AdamantError::Parameter(format!(
            "eigenvalues must be positive and finite, got {bad}"
        )));
    }
    Ok(WeightVector {
        w: eigenvalues
            .iter()
            .map(|&eta| spectral_weight(eta, lambda))
            .collect(),
        lambda,
    })
}

/// `Σ_j w_j Σ_k Z_jk²`.
pub fn score_statistic(z: &PrincipalCorrelations, w: &WeightVector) -> Result<StatValue> {
    if z.rank() != w.len() {
        return Err(AdamantError::Shape(format!(
            "{} principal correlations but {} weights",
            z.rank(),
            w.len()
        )));
    }
    let value = z
        .row_energy()
        .iter()
        .zip(&w.w)
        .map(|(e, w)| w * e)
        .sum();
    Ok(StatValue {
        value,
        weights: w.clone(),
    })
}

/// `R(H, K) = tr(HK) / sqrt(tr(H²) tr(K²))`.
pub fn matrix_correlation(h: &GramMatrix, k: &GramMatrix) -> Result<f64> {
    if h.n() != k.n() {
        return Err(AdamantError::Shape(format!(
            "Gram matrices are {0}x{0} and {1}x{1}",
            h.n(),
            k.n()
        )));
    }
    let hh = h.trace_product(h);
    let kk = k.trace_product(k);
    if hh <= 0.0 || kk <= 0.0 {
        return Err(AdamantError::Degenerate(
            "matrix correlation of a zero Gram matrix".into(),
        ));
    }
    Ok(h.trace_product(k) / (hh * kk).sqrt())
}

/// `R(YY^T, K)` from principal correlations: `Σ w_j Z_j² / (n sqrt(Σ w_j²))`.
///
/// Valid for a standardized univariate response (`tr(H²) = n²`). With
/// `w_j = 1` it is `R²(X, Y) / sqrt(r)`, with `w_j = η_j` the random-effects
/// form and with ridge weights the ridge form.
pub fn correlation_closed_form(z: &PrincipalCorrelations, w: &WeightVector, n: usize) -> Result<f64> {
    let stat = score_statistic(z, w)?;
    let norm = w.w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || n == 0 {
        return Err(AdamantError::Degenerate("empty weight vector".into()));
    }
    Ok(stat.value / (n as f64 * norm))
}

/// Reference distribution for `Σ_j w_j χ²_{1,j}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NullMethod {
    /// `draws` simulated mixtures; draws are generated in chunks of
    /// [`MC_CHUNK`], chunk `c` from stream `c` of `seed`.
    MonteCarlo { draws: usize, seed: u64 },
    /// Scaled chi-square `a χ²_ν` with `a = Σw²/Σw` and `ν = (Σw)²/Σw²`.
    Satterthwaite,
}

pub const MC_CHUNK: usize = 8192;

/// Upper tail `P(Σ w_j χ²_{1,j} ≥ statistic)`.
pub fn null_pvalue_mixture(statistic: f64, w: &WeightVector, method: NullMethod) -> Result<f64> {
    if w.is_empty() {
        return Err(AdamantError::Parameter("empty weight vector".into()));
    }
    if statistic <= 0.0 {
        return Ok(1.0);
    }
    match method {
        NullMethod::Satterthwaite => {
            let s1: f64 = w.w.iter().sum();
            let s2: f64 = w.w.iter().map(|x| x * x).sum();
            let scale = s2 / s1;
            let dof = s1 * s1 / s2;
            Ok(gamma_ur(dof / 2.0, statistic / scale / 2.0))
        }
        NullMethod::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(AdamantError::Parameter("need at least one draw".into()));
            }
            let chunks = draws.div_ceil(MC_CHUNK);
            let exceed: usize = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = substream(seed, c as u64);
                    let len = MC_CHUNK.min(draws - c * MC_CHUNK);
                    (0..len)
                        .filter(|_| {
                            let q: f64 = w
                                .w
                                .iter()
                                .map(|wj| {
                                    let g: f64 = StandardNormal.sample(&mut rng);
                                    wj * g * g
                                })
                                .sum();
                            q >= statistic
                        })
                        .count()
                })
                .sum();
            Ok(exceed as f64 / draws as f64)
        }
    }
}

/// Null centering and scaling of a ridge statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizedMoments {
    /// `E T*_λ` under the variance components model.
    pub mean: f64,
    /// `σ_ε² sqrt(2 Σ w_j²)`.
    pub standardizer: f64,
}

fn validate_moments(eta: &[f64], sigma2: f64, sigma_eps2: f64) -> Result<()> {
    if !(sigma_eps2 > 0.0) {
        return Err(AdamantError::Parameter(format!(
            "error variance must be positive, got {sigma_eps2}"
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(AdamantError::Parameter(format!(
            "signal variance must be nonnegative, got {sigma2}"
        )));
    }
    if eta.is_empty() {
        return Err(AdamantError::Parameter("no eigenvalues".into()));
    }
    Ok(())
}

/// `E T*_λ = (σ²/σ_ε²) Σ η_j w_j / sqrt(2 Σ w_j²)`, which is
/// `(σ²/σ_ε²) Σ (η²/(η+λ)) / sqrt(2 Σ (η/(η+λ))²)` for finite `λ` and
/// `(σ²/σ_ε²) sqrt(Σ η² / 2)` at `λ = ∞`.
pub fn standardized_statistics(
    eta: &[f64],
    lambda: f64,
    sigma2: f64,
    sigma_eps2: f64,
) -> Result<StandardizedMoments> {
    validate_moments(eta, sigma2, sigma_eps2)?;
    let w = ridge_weights(eta, lambda)?;
    let root = (2.0 * w.w.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let signal: f64 = eta.iter().zip(&w.w).map(|(e, w)| e * w).sum();
    Ok(StandardizedMoments {
        mean: sigma2 / sigma_eps2 * signal / root,
        standardizer: sigma_eps2 * root,
    })
}

/// `Cov(T*_λ1, T*_λ2)` under `Y ~ N(0, σ² X X^T + σ_ε² I)`:
/// `2 Σ w1_j w2_j (σ² η_j + σ_ε²)² / (σ_ε⁴ sqrt(2Σw1²) sqrt(2Σw2²))`.
///
/// At `σ² = 0` this is the cosine of the two weight vectors, so a statistic
/// has unit variance and proportional weights are perfectly correlated.
pub fn standardized_covariance(
    eta: &[f64],
    lambda1: f64,
    lambda2: f64,
    sigma2: f64,
    sigma_eps2: f64,
) -> Result<f64> {
    validate_moments(eta, sigma2, sigma_eps2)?;
    let w1 = ridge_weights(eta, lambda1)?;
    let w2 = ridge_weights(eta, lambda2)?;
    let n1: f64 = w1.w.iter().map(|x| x * x).sum();
    let n2: f64 = w2.w.iter().map(|x| x * x).sum();
    let cross: f64 = eta
        .iter()
        .zip(w1.w.iter().zip(&w2.w))
        .map(|(e, (a, b))| {
            let v = sigma2 * e / sigma_eps2 + 1.0;
            a * b * v * v
        })
        .sum();
    Ok(cross / (n1 * n2).sqrt())
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Density of the maximum of two standard normals with correlation `rho`,
/// `2 φ(x) Φ((1 - ρ) x / sqrt(1 - ρ²))`.
pub fn max2_density(x: f64, rho: f64) -> f64 {
    let slope = (1.0 - rho) / (1.0 - rho * rho).sqrt();
    2.0 * std_normal_pdf(x) * std_normal_cdf(slope * x)
}

/// `f₀(x) = 2 φ(x) Φ(x)`, the `ρ = 0` case of [`max2_density`].
pub fn max2_null_density(x: f64) -> f64 {
    2.0 * std_normal_pdf(x) * std_normal_cdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::{center_columns, gram, standardize_columns, thin_svd, KernelSpec, Strategy};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_fixture() -> SpectralDecomposition {
        let x = FeatureMatrix::assume_centered(DMatrix::identity(2, 2)).unwrap();
        thin_svd(&x, 1e-10).unwrap()
    }

    fn random(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn identity_projection() {
        let d = identity_fixture();
        let y = FeatureMatrix::assume_standardized(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]))
            .unwrap();
        let z = principal_correlations(&d, &y).unwrap();
        let mut e = z.row_energy();
        e.sort_by(f64::total_cmp);
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(z.z().abs().sum(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_response_gives_zero() {
        // X spans (1,-1,0,0) and (0,0,1,-1); Y = (1,1,-1,-1) is orthogonal.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let d = thin_svd(&FeatureMatrix::assume_centered(x).unwrap(), 1e-10).unwrap();
        let y = standardize_columns(&DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]))
            .unwrap();
        let z = principal_correlations(&d, &y).unwrap();
        assert!(z.z().amax() < 1e-12);
    }

    #[test]
    fn projection_shrinks_norm() {
        let x = center_columns(&random(15, 4, 1)).unwrap();
        let y = standardize_columns(&random(15, 1, 2)).unwrap();
        let d = thin_svd(&x, 1e-10).unwrap();
        let z = principal_correlations(&d, &y).unwrap();
        assert!(z.z().norm() <= y.data().norm() + 1e-10);
        assert!(z.z().norm_squared() <= 15.0 + 1e-8);
    }

    #[test]
    fn dimension_mismatch() {
        let d = identity_fixture();
        let y = standardize_columns(&random(3, 1, 3)).unwrap();
        assert!(matches!(
            principal_correlations(&d, &y),
            Err(AdamantError::Shape(_))
        ));
    }

    #[test]
    fn weight_endpoints() {
        let w = ridge_weights(&[2.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(w.weights()[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(w.weights()[1], 0.5, epsilon = 1e-15);
        assert_eq!(ridge_weights(&[2.0, 1.0], 0.0).unwrap().weights(), &[1.0, 1.0]);
        assert_eq!(
            ridge_weights(&[2.0, 1.0], f64::INFINITY).unwrap().weights(),
            &[2.0, 1.0]
        );
        assert!(ridge_weights(&[2.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn weights_decrease_in_lambda() {
        let eta = [5.0, 2.0, 0.5];
        let a = ridge_weights(&eta, 0.5).unwrap();
        let b = ridge_weights(&eta, 5.0).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!(x > y);
        }
    }

    #[test]
    fn ridge_one_statistic_matches_trace() {
        // X = diag(sqrt 2, 1) has η = (2, 1); Y = (1, 1) gives Z = (1, 1).
        let x = DMatrix::from_diagonal(&DVector::from_vec(vec![2f64.sqrt(), 1.0]));
        let xf = FeatureMatrix::assume_centered(x).unwrap();
        let d = thin_svd(&xf, 1e-10).unwrap();
        let y = FeatureMatrix::assume_standardized(DMatrix::from_column_slice(2, 1, &[1.0, 1.0]))
            .unwrap();
        let z = principal_correlations(&d, &y).unwrap();
        let w = ridge_weights(d.eigenvalues(), 1.0).unwrap();
        let stat = score_statistic(&z, &w).unwrap();
        assert_relative_eq!(stat.value, 7.0 / 6.0, epsilon = 1e-12);

        let k = gram(&xf, &KernelSpec::ridge(1.0).unwrap(), Strategy::Auto).unwrap();
        let h = y.data() * y.data().transpose();
        assert_relative_eq!(h.dot(k.data()), 7.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn simple_statistics() {
        let z = PrincipalCorrelations::from_matrix(DMatrix::zeros(2, 1));
        let w = ridge_weights(&[2.0, 1.0], 1.0).unwrap();
        assert_eq!(score_statistic(&z, &w).unwrap().value, 0.0);
        let z = PrincipalCorrelations::from_matrix(DMatrix::from_column_slice(2, 1, &[3.0, 4.0]));
        let ones = ridge_weights(&[2.0, 1.0], 0.0).unwrap();
        assert_eq!(score_statistic(&z, &ones).unwrap().value, 25.0);
    }

    #[test]
    fn correlation_identities() {
        let x = center_columns(&random(6, 3, 4)).unwrap();
        let h = gram(&x, &KernelSpec::Euclidean, Strategy::Auto).unwrap();
        assert_relative_eq!(matrix_correlation(&h, &h).unwrap(), 1.0, epsilon = 1e-12);
        let i = GramMatrix::new(DMatrix::identity(4, 4), KernelSpec::Euclidean).unwrap();
        assert_relative_eq!(matrix_correlation(&i, &i).unwrap(), 1.0, epsilon = 1e-15);
        let z = GramMatrix::new(DMatrix::zeros(4, 4), KernelSpec::Euclidean).unwrap();
        assert!(matrix_correlation(&i, &z).is_err());
    }

    #[test]
    fn fixed_effects_correlation_is_r_squared_over_sqrt_p() {
        let n = 8;
        let x = center_columns(&random(n, 3, 5)).unwrap();
        let y = standardize_columns(&random(n, 1, 6)).unwrap();
        let k = gram(&x, &KernelSpec::Mahalanobis, Strategy::Auto).unwrap();
        let h = GramMatrix::new(y.data() * y.data().transpose(), KernelSpec::Euclidean).unwrap();
        let r = matrix_correlation(&h, &k).unwrap();

        // Independent R² from the least-squares fit via normal equations.
        let xd = x.data();
        let beta = (xd.transpose() * xd)
            .try_inverse()
            .unwrap()
            * xd.transpose()
            * y.data();
        let fitted = xd * beta;
        let r2 = fitted.norm_squared() / y.data().norm_squared();
        assert_relative_eq!(r, r2 / 3f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn trace_equals_weighted_norm_for_every_kernel() {
        let x = center_columns(&random(20, 7, 7)).unwrap();
        let y = standardize_columns(&random(20, 1, 8)).unwrap();
        let d = thin_svd(&x, 1e-10).unwrap();
        let z = principal_correlations(&d, &y).unwrap();
        let h = y.data() * y.data().transpose();
        for lambda in [0.0, 0.3, 4.0, 50.0, f64::INFINITY] {
            let spec = KernelSpec::ridge(lambda).unwrap();
            let k = gram(&x, &spec, Strategy::Auto).unwrap();
            let stat = score_statistic(&z, &ridge_weights(d.eigenvalues(), lambda).unwrap())
                .unwrap()
                .value;
            assert_relative_eq!(h.dot(k.data()), stat, max_relative = 1e-8);
        }
    }

    /// P(2 A + B > t) for independent χ²₁ variables A, B, by Simpson's rule
    /// after substituting A = u² to remove the density singularity.
    fn two_term_mixture_tail(t: f64) -> f64 {
        let upper = (t / 2.0).sqrt();
        let steps = 20_000;
        let h = upper / steps as f64;
        let f = |u: f64| {
            let rest = t - 2.0 * u * u;
            let cdf_b = statrs::function::erf::erf((rest / 2.0).max(0.0).sqrt());
            (2.0 / std::f64::consts::PI).sqrt() * (-u * u / 2.0).exp() * cdf_b
        };
        let mut s = f(0.0) + f(upper);
        for i in 1..steps {
            let u = i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        1.0 - s * h / 3.0
    }

    #[test]
    fn mixture_tail_methods_agree_with_quadrature() {
        let w = ridge_weights(&[2.0, 1.0], f64::INFINITY).unwrap();
        let exact = two_term_mixture_tail(3.0);
        let mc = null_pvalue_mixture(
            3.0,
            &w,
            NullMethod::MonteCarlo {
                draws: 1_000_000,
                seed: 11,
            },
        )
        .unwrap();
        let sat = null_pvalue_mixture(3.0, &w, NullMethod::Satterthwaite).unwrap();
        let se = (exact * (1.0 - exact) / 1e6).sqrt();
        assert!((mc - exact).abs() < 3.0 * se, "mc {mc} exact {exact}");
        assert!((sat - exact).abs() < 0.01, "sat {sat} exact {exact}");
        assert!((mc - sat).abs() < 0.01);
    }

    #[test]
    fn equal_weights_give_chi_square() {
        let p = 5;
        let w = ridge_weights(&vec![1.0; p], 0.0).unwrap();
        let t = 9.0;
        let draws = 200_000;
        let mc = null_pvalue_mixture(t, &w, NullMethod::MonteCarlo { draws, seed: 3 }).unwrap();
        let exact = gamma_ur(p as f64 / 2.0, t / 2.0);
        let se = (exact * (1.0 - exact) / draws as f64).sqrt();
        assert!((mc - exact).abs() < 3.0 * se);
        // Satterthwaite is exact for equal weights.
        let sat = null_pvalue_mixture(t, &w, NullMethod::Satterthwaite).unwrap();
        assert_relative_eq!(sat, exact, epsilon = 1e-12);
    }

    #[test]
    fn zero_statistic_and_empty_weights() {
        let w = ridge_weights(&[1.0], 0.0).unwrap();
        assert_eq!(null_pvalue_mixture(0.0, &w, NullMethod::Satterthwaite).unwrap(), 1.0);
        let empty = ridge_weights(&[], 0.0).unwrap();
        assert!(null_pvalue_mixture(1.0, &empty, NullMethod::Satterthwaite).is_err());
    }

    #[test]
    fn monte_carlo_independent_of_thread_count() {
        let w = ridge_weights(&[3.0, 1.0, 0.2], f64::INFINITY).unwrap();
        let method = NullMethod::MonteCarlo {
            draws: 50_000,
            seed: 9,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| null_pvalue_mixture(4.0, &w, method).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn standardized_mean_cases() {
        let eta = [2.0, 1.0];
        assert_eq!(standardized_statistics(&eta, 1.0, 0.0, 1.0).unwrap().mean, 0.0);

        let inf = standardized_statistics(&eta, f64::INFINITY, 0.7, 1.3).unwrap();
        assert_relative_eq!(inf.mean, 0.7 / 1.3 * (5.0f64 / 2.0).sqrt(), epsilon = 1e-14);

        let big = standardized_statistics(&eta, 1e9, 0.7, 1.3).unwrap();
        assert_relative_eq!(big.mean, inf.mean, max_relative = 1e-8);

        // η = (2, 1), λ = 1: Σ η²/(η+λ) = 4/3 + 1/2, Σ (η/(η+λ))² = 4/9 + 1/4.
        let m = standardized_statistics(&eta, 1.0, 1.0, 1.0).unwrap();
        let num = 4.0 / 3.0 + 0.5;
        let den = (2.0_f64 * (4.0 / 9.0 + 0.25)).sqrt();
        assert_relative_eq!(m.mean, num / den, epsilon = 1e-14);
        assert_relative_eq!(m.standardizer, den, epsilon = 1e-14);
        assert!(standardized_statistics(&eta, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn covariance_cases() {
        let eta = [3.0, 2.0, 1.0];
        assert_relative_eq!(
            standardized_covariance(&eta, 4.0, 4.0, 0.0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            standardized_covariance(&[2.0; 4], 0.5, 30.0, 0.0, 1.0).unwrap(),
            1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn covariance_matches_monte_carlo() {
        let eta = [3.0, 2.0, 1.0];
        let w1 = ridge_weights(&eta, 1.0).unwrap();
        let w2 = ridge_weights(&eta, 10.0).unwrap();
        let s1 = (2.0 * w1.weights().iter().map(|x| x * x).sum::<f64>()).sqrt();
        let s2 = (2.0 * w2.weights().iter().map(|x| x * x).sum::<f64>()).sqrt();
        let m1: f64 = w1.weights().iter().sum();
        let m2: f64 = w2.weights().iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let reps = 100_000;
        let mut prods = Vec::with_capacity(reps);
        for _ in 0..reps {
            let z: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let t1 = (z.iter().zip(w1.weights()).map(|(z, w)| w * z * z).sum::<f64>() - m1) / s1;
            let t2 = (z.iter().zip(w2.weights()).map(|(z, w)| w * z * z).sum::<f64>() - m2) / s2;
            prods.push(t1 * t2);
        }
        let mean = prods.iter().sum::<f64>() / reps as f64;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let theory = standardized_covariance(&eta, 1.0, 10.0, 0.0, 1.0).unwrap();
        assert!((mean - theory).abs() < 3.0 * se, "{mean} vs {theory} (se {se})");
    }

    #[test]
    fn max_of_two_normals_density() {
        assert_relative_eq!(max2_null_density(0.0), std_normal_pdf(0.0), epsilon = 1e-15);
        assert_relative_eq!(max2_null_density(0.0), 0.398_942_280_401_432_7, epsilon = 1e-12);
        let (a, b, steps) = (-12.0, 12.0, 24_000);
        let h = (b - a) / steps as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let mut s = f(a) + f(b);
            for i in 1..steps {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            s * h / 3.0
        };
        assert!((simpson(&max2_null_density) - 1.0).abs() < 1e-6);
        let mean = simpson(&|x| x * max2_null_density(x));
        assert_relative_eq!(mean, 1.0 / std::f64::consts::PI.sqrt(), epsilon = 1e-6);
        assert_relative_eq!(max2_density(0.7, 0.0), max2_null_density(0.7), epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reps = 200_000;
        let mc: f64 = (0..reps)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                a.max(b)
            })
            .sum::<f64>()
            / reps as f64;
        // sd of max is sqrt(1 - 1/π)
        let se = (1.0 - 1.0 / std::f64::consts::PI).sqrt() / (reps as f64).sqrt();
        assert!((mc - 1.0 / std::f64::consts::PI.sqrt()).abs() < 3.0 * se);
    }
}
