//! Synthetic data for power and calibration studies.
//!
//! Univariate studies draw a compound-symmetric design and a response from
//! either a variance-components (`b ~ N(0, σ_b² I)`) or a fixed-effects
//! (`β_j = (−1)^j β`) model. The imaging-genetics study draws grouped SNP
//! vectors and multichannel EEG-like series whose mixing weights depend on
//! genetic similarity.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AdamantError, Result};
use crate::matrices::{thin_svd, FeatureMatrix, GramMatrix, KernelSpec, DEFAULT_RANK_TOLERANCE};
use crate::rng::{derive_seed, substream};

const TAG_WEIGHTS: u64 = 0x5745;
const TAG_CHANNELS: u64 = 0x4348;
const TAG_SUBJECT: u64 = 0x5355;

/// Univariate power-study settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub sigma_b2: f64,
    pub sigma_eps2: f64,
    pub beta_magnitude: f64,
    /// Fraction of coefficients set to zero, in `[0, 1)`.
    pub sparsity: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 200,
            p: 300,
            rho: 0.1,
            sigma_b2: 0.035 * 0.035,
            sigma_eps2: 1.0,
            beta_magnitude: 0.05,
            sparsity: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 {
            return Err(AdamantError::Parameter(format!(
                "need n >= 2 and p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        check_rho(self.rho)?;
        check_sparsity(self.sparsity)?;
        if !(self.sigma_b2 >= 0.0 && self.sigma_eps2 >= 0.0) {
            return Err(AdamantError::Parameter("variances must be non-negative".into()));
        }
        if !self.beta_magnitude.is_finite() {
            return Err(AdamantError::Parameter("beta magnitude must be finite".into()));
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(AdamantError::Parameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    Ok(())
}

fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(AdamantError::Parameter(format!(
            "sparsity must lie in [0, 1), got {s}"
        )));
    }
    Ok(())
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `n` draws from `N(0, Σ)` with `Σ = (1 − ρ) I + ρ 11ᵀ`, built as
/// `sqrt(1 − ρ) z_ij + sqrt(ρ) f_i` with a per-row shared factor `f_i`.
pub fn gen_design_cs(n: usize, p: usize, rho: f64, seed: u64) -> Result<FeatureMatrix> {
    check_rho(rho)?;
    let mut rng = substream(seed, 0);
    let z = normal_matrix(&mut rng, n, p);
    let f = normal_vector(&mut rng, n);
    let (a, c) = ((1.0 - rho).sqrt(), rho.sqrt());
    FeatureMatrix::new(DMatrix::from_fn(n, p, |i, j| a * z[(i, j)] + c * f[i]))
}

/// Simulated response together with the coefficients that produced it.
#[derive(Debug, Clone)]
pub struct LinearResponse {
    /// Standardized `n × 1` response.
    pub y: FeatureMatrix,
    pub coefficients: DVector<f64>,
}

fn sparsify(rng: &mut ChaCha8Rng, coef: &mut DVector<f64>, sparsity: f64) {
    let p = coef.len();
    let zeros = ((sparsity * p as f64).ceil() as usize).min(p);
    for j in sample(rng, p, zeros) {
        coef[j] = 0.0;
    }
}

fn linear_response(
    x: &FeatureMatrix,
    coefficients: DVector<f64>,
    sigma_eps2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<LinearResponse> {
    let x = x.clone().centered()?;
    let eps = normal_vector(rng, x.n()) * sigma_eps2.sqrt();
    let y = x.data() * &coefficients + eps;
    let y = FeatureMatrix::new(DMatrix::from_column_slice(x.n(), 1, y.as_slice()))?.standardized()?;
    Ok(LinearResponse { y, coefficients })
}

/// Variance-components response `Y = Xb + ε`, `b ~ N(0, σ_b² I)`, with a
/// random `⌈sparsity · p⌉` subset of `b` zeroed.
pub fn gen_vc_response(
    x: &FeatureMatrix,
    sigma_b2: f64,
    sigma_eps2: f64,
    sparsity: f64,
    seed: u64,
) -> Result<LinearResponse> {
    check_sparsity(sparsity)?;
    if !(sigma_b2 >= 0.0 && sigma_eps2 >= 0.0) {
        return Err(AdamantError::Parameter("variances must be non-negative".into()));
    }
    let mut rng = substream(seed, 1);
    let mut b = normal_vector(&mut rng, x.p()) * sigma_b2.sqrt();
    sparsify(&mut rng, &mut b, sparsity);
    linear_response(x, b, sigma_eps2, &mut rng)
}

/// Fixed-effects response with alternating signs, `β_j = (−1)^j β` for
/// `j = 1..p`.
pub fn gen_fe_response(
    x: &FeatureMatrix,
    beta_magnitude: f64,
    sigma_eps2: f64,
    sparsity: f64,
    seed: u64,
) -> Result<LinearResponse> {
    check_sparsity(sparsity)?;
    if !(sigma_eps2 >= 0.0) {
        return Err(AdamantError::Parameter("variances must be non-negative".into()));
    }
    let mut rng = substream(seed, 2);
    let mut beta = DVector::from_fn(x.p(), |j, _| {
        if j % 2 == 0 {
            -beta_magnitude
        } else {
            beta_magnitude
        }
    });
    sparsify(&mut rng, &mut beta, sparsity);
    linear_response(x, beta, sigma_eps2, &mut rng)
}

fn rotation(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn two_column_factor(x: &FeatureMatrix, theta: f64) -> Result<DMatrix<f64>> {
    if x.p() != 2 {
        return Err(AdamantError::Shape(format!(
            "rotated illustration needs a 2-column design, got {}",
            x.p()
        )));
    }
    let d = thin_svd(&x.clone().centered()?, DEFAULT_RANK_TOLERANCE)?;
    if d.rank() != 2 {
        return Err(AdamantError::Degenerate("design has rank below 2".into()));
    }
    let delta = DMatrix::from_diagonal(&DVector::from_column_slice(d.singular_values()));
    Ok(d.u() * rotation(theta) * delta)
}

/// `K^(θ) = U Θ Δ² Θᵀ Uᵀ` for the centered 2-column design `X = U Δ Vᵀ`.
pub fn rotated_kernel(x: &FeatureMatrix, theta: f64) -> Result<GramMatrix> {
    let f = two_column_factor(x, theta)?;
    let k = &f * f.transpose();
    GramMatrix::new((&k + k.transpose()) * 0.5, KernelSpec::Euclidean)
}

/// `Y ~ N(0, σ² K^(θ) + σ_ε² I)`, drawn as `σ U Θ Δ z + σ_ε e`. The
/// response is returned unstandardized.
pub fn gen_rotated_vc(
    x: &FeatureMatrix,
    theta: f64,
    sigma2: f64,
    sigma_eps2: f64,
    seed: u64,
) -> Result<FeatureMatrix> {
    if !(sigma2 >= 0.0 && sigma_eps2 >= 0.0) {
        return Err(AdamantError::Parameter("variances must be non-negative".into()));
    }
    let f = two_column_factor(x, theta)?;
    let mut rng = substream(seed, 3);
    let z = normal_vector(&mut rng, 2);
    let e = normal_vector(&mut rng, x.n());
    let y = f * z * sigma2.sqrt() + e * sigma_eps2.sqrt();
    FeatureMatrix::new(DMatrix::from_column_slice(x.n(), 1, y.as_slice()))
}

/// Grouped SNP-like design: each of `groups` templates is uniform on
/// `{−1, 0, 1}^p`, each subject adds `N(0, I_p)` noise to its group's
/// template. Subjects are assigned to groups in contiguous equal blocks.
/// The output is column-centered.
pub fn gen_snp_groups(n: usize, p_snp: usize, groups: usize, seed: u64) -> Result<FeatureMatrix> {
    if groups == 0 || !n.is_multiple_of(groups) {
        return Err(AdamantError::Parameter(format!(
            "{groups} groups do not divide n = {n} evenly"
        )));
    }
    let mut rng = substream(seed, 4);
    let templates = DMatrix::from_fn(groups, p_snp, |_, _| rng.random_range(-1i8..=1) as f64);
    let per_group = n / groups;
    let noise = normal_matrix(&mut rng, n, p_snp);
    let x = DMatrix::from_fn(n, p_snp, |i, j| templates[(i / per_group, j)] + noise[(i, j)]);
    FeatureMatrix::new(x)?.centered()
}

/// Stationary AR(2) process `x_t = φ₁ x_{t−1} + φ₂ x_{t−2} + e_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar2 {
    pub phi1: f64,
    pub phi2: f64,
}

impl Ar2 {
    /// Complex roots `r e^{±iω₀}` with `ω₀ = 2π f₀ / fs`:
    /// `φ₁ = 2 r cos ω₀`, `φ₂ = −r²`.
    pub fn from_peak(peak_hz: f64, sample_rate_hz: f64, root_modulus: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(AdamantError::Parameter("sample rate must be positive".into()));
        }
        if !(peak_hz > 0.0 && peak_hz < sample_rate_hz / 2.0) {
            return Err(AdamantError::Parameter(format!(
                "peak {peak_hz} Hz must lie in (0, {}) Hz",
                sample_rate_hz / 2.0
            )));
        }
        if !(root_modulus > 0.0 && root_modulus <= 1.0) {
            return Err(AdamantError::Parameter(format!(
                "root modulus must lie in (0, 1], got {root_modulus}"
            )));
        }
        let w = 2.0 * std::f64::consts::PI * peak_hz / sample_rate_hz;
        Ok(Ar2 {
            phi1: 2.0 * root_modulus * w.cos(),
            phi2: -root_modulus * root_modulus,
        })
    }

    pub fn root_modulus(&self) -> f64 {
        (-self.phi2).sqrt()
    }

    pub fn is_stationary(&self) -> bool {
        self.phi2 > -1.0 && self.phi2 + self.phi1 < 1.0 && self.phi2 - self.phi1 < 1.0
    }

    /// Spectral density for unit innovation variance at `freq_hz`.
    pub fn spectrum(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        let z = Complex64::from_polar(1.0, -w);
        let den = Complex64::new(1.0, 0.0) - self.phi1 * z - self.phi2 * z * z;
        1.0 / den.norm_sqr()
    }

    /// Maximizer of [`Ar2::spectrum`] on `[0, fs/2]`, from
    /// `cos ω* = φ₁ (φ₂ − 1) / (4 φ₂)`.
    pub fn peak_frequency(&self, sample_rate_hz: f64) -> f64 {
        let c = (self.phi1 * (self.phi2 - 1.0) / (4.0 * self.phi2)).clamp(-1.0, 1.0);
        c.acos() * sample_rate_hz / (2.0 * std::f64::consts::PI)
    }

    /// Stationary variance for unit innovations; infinite on the unit circle.
    pub fn stationary_variance(&self) -> f64 {
        if !self.is_stationary() {
            return f64::INFINITY;
        }
        let (a, b) = (self.phi1, self.phi2);
        (1.0 - b) / ((1.0 + b) * ((1.0 - b) * (1.0 - b) - a * a))
    }

    /// `len` samples after discarding `burn_in`, started from zero.
    pub fn simulate(&self, rng: &mut ChaCha8Rng, len: usize, burn_in: usize) -> Vec<f64> {
        let (mut x1, mut x2) = (0.0, 0.0);
        let mut out = Vec::with_capacity(len);
        for t in 0..burn_in + len {
            let e: f64 = rng.sample(StandardNormal);
            let x = self.phi1 * x1 + self.phi2 * x2 + e;
            x2 = x1;
            x1 = x;
            if t >= burn_in {
                out.push(x);
            }
        }
        out
    }
}

/// Multichannel EEG-like simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegSimConfig {
    pub n: usize,
    pub p_snp: usize,
    pub channels: usize,
    pub linked_channels: usize,
    pub series_length: usize,
    pub sample_rate_hz: f64,
    pub peak_freqs_hz: (f64, f64),
    pub ar_root_modulus: f64,
    pub sigma_g2: f64,
    pub trials: usize,
    /// Standard deviation of the white noise added to every channel,
    /// relative to the unit-variance AR sources.
    pub channel_noise_sd: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for EegSimConfig {
    fn default() -> Self {
        EegSimConfig {
            n: 200,
            p_snp: 300,
            channels: 20,
            linked_channels: 10,
            series_length: 1000,
            sample_rate_hz: 256.0,
            peak_freqs_hz: (5.12, 12.8),
            ar_root_modulus: 0.995,
            sigma_g2: 0.0,
            trials: 1,
            channel_noise_sd: 2.0,
            burn_in: 500,
            seed: 0,
        }
    }
}

impl EegSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.linked_channels > self.channels {
            return Err(AdamantError::Parameter(format!(
                "{} linked channels exceed {} channels",
                self.linked_channels, self.channels
            )));
        }
        if self.channels < 2 || self.series_length < 2 || self.trials == 0 || self.n < 2 {
            return Err(AdamantError::Parameter(
                "need n >= 2, channels >= 2, series length >= 2 and trials >= 1".into(),
            ));
        }
        if !(self.sigma_g2 >= 0.0 && self.channel_noise_sd >= 0.0) {
            return Err(AdamantError::Parameter("variances must be non-negative".into()));
        }
        self.sources().map(|_| ())
    }

    /// The two AR(2) basis processes.
    pub fn sources(&self) -> Result<[Ar2; 2]> {
        Ok([
            Ar2::from_peak(self.peak_freqs_hz.0, self.sample_rate_hz, self.ar_root_modulus)?,
            Ar2::from_peak(self.peak_freqs_hz.1, self.sample_rate_hz, self.ar_root_modulus)?,
        ])
    }
}

/// Normalized mixing weights of every subject and channel.
#[derive(Debug, Clone)]
pub struct MixingWeights {
    /// `n × channels`: weight of the first AR basis; the second is
    /// `1 − first`.
    pub first: DMatrix<f64>,
    /// Channels whose weights depend on the SNPs, sorted.
    pub linked: Vec<usize>,
}

/// Draw the mixing weights.
///
/// For a linked channel `j` and basis `m` the subject vector is
/// `W_jm ~ N(0, σ_g² G + I)` with `G = X Xᵀ / p` of the SNP matrix; unlinked
/// channels use `N(0, I)`. Each subject's pair `(W_j1, W_j2)` is squared and
/// normalized to sum to one. The identity term keeps the weights
/// well-defined at `σ_g² = 0`, where the linked channels reduce to the
/// unlinked ones.
pub fn eeg_mixing_weights(config: &EegSimConfig, snps: &FeatureMatrix) -> Result<MixingWeights> {
    config.validate()?;
    let n = snps.n();
    if n != config.n {
        return Err(AdamantError::Shape(format!(
            "SNP matrix has {n} rows, configuration has n = {}",
            config.n
        )));
    }
    let mut pick = substream(derive_seed(config.seed, TAG_CHANNELS, 0), 0);
    let mut linked = sample(&mut pick, config.channels, config.linked_channels).into_vec();
    linked.sort_unstable();

    let x = snps.clone().centered()?;
    let g = x.data() * x.data().transpose() / x.p() as f64;
    let cov = g * config.sigma_g2 + DMatrix::identity(n, n);
    let chol = Cholesky::new(cov)
        .ok_or_else(|| AdamantError::Degenerate("weight covariance is not positive definite".into()))?;
    let l = chol.l();

    let mut rng = substream(derive_seed(config.seed, TAG_WEIGHTS, 0), 0);
    let mut first = DMatrix::zeros(n, config.channels);
    for j in 0..config.channels {
        let is_linked = linked.binary_search(&j).is_ok();
        let draw = |rng: &mut ChaCha8Rng| {
            let z = normal_vector(rng, n);
            if is_linked {
                &l * z
            } else {
                z
            }
        };
        let w1 = draw(&mut rng);
        let w2 = draw(&mut rng);
        for i in 0..n {
            let (a, b) = (w1[i] * w1[i], w2[i] * w2[i]);
            first[(i, j)] = if a + b > 0.0 { a / (a + b) } else { 0.5 };
        }
    }
    Ok(MixingWeights { first, linked })
}

/// Trials of one subject, each `channels × series_length`.
///
/// Within a trial all channels share the two AR sources (scaled to unit
/// variance when stationary) and add independent white noise. Subject `i`
/// draws from its own substream.
pub fn eeg_subject_trials(
    config: &EegSimConfig,
    weights: &MixingWeights,
    subject: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let sources = config.sources()?;
    let scales = sources.map(|s| {
        let v = s.stationary_variance();
        if v.is_finite() {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let mut rng = substream(derive_seed(config.seed, TAG_SUBJECT, subject as u64), 0);
    let (q, t) = (config.channels, config.series_length);
    let trials = (0..config.trials)
        .map(|_| {
            let s1 = sources[0].simulate(&mut rng, t, config.burn_in);
            let s2 = sources[1].simulate(&mut rng, t, config.burn_in);
            let noise = normal_matrix(&mut rng, q, t);
            DMatrix::from_fn(q, t, |j, k| {
                let a = weights.first[(subject, j)];
                a * scales[0] * s1[k] + (1.0 - a) * scales[1] * s2[k]
                    + config.channel_noise_sd * noise[(j, k)]
            })
        })
        .collect();
    Ok(trials)
}

/// Simulated EEG data of every subject.
#[derive(Debug, Clone)]
pub struct EegData {
    pub weights: MixingWeights,
    /// `subjects[i][k]` is trial `k` of subject `i`.
    pub subjects: Vec<Vec<DMatrix<f64>>>,
}

/// Full simulation; subjects are generated in parallel from
/// subject-indexed substreams.
pub fn gen_eeg(config: &EegSimConfig, snps: &FeatureMatrix) -> Result<EegData> {
    let weights = eeg_mixing_weights(config, snps)?;
    let subjects = (0..config.n)
        .into_par_iter()
        .map(|i| eeg_subject_trials(config, &weights, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EegData { weights, subjects })
}
