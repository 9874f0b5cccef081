//! Band-averaged coherence of multichannel series.
//!
//! For a trial with `q` channels of length `T` the DFT coefficient of
//! channel `m` at `ω_j = j/T` is
//!
//! ```text
//! d_m(ω_j) = T^{-1/2} Σ_{t=1..T} x_m(t) exp(−2πi ω_j t)
//! ```
//!
//! The spectral matrix at bin `j` is the rank-1 outer product `d dᴴ`.
//! Averaging it over the bins of a band and then over trials gives `S`, and
//! the coherence is `r_mn = |S_mn|² / (S_mm S_nn)`. Without averaging every
//! `r_mn` is exactly 1.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{AdamantError, Result};
use crate::matrices::FeatureMatrix;

/// A frequency band `[low_hz, high_hz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, low_hz: f64, high_hz: f64) -> Result<Self> {
        let name = name.into();
        if !(low_hz > 0.0 && high_hz > low_hz && high_hz.is_finite()) {
            return Err(AdamantError::Parameter(format!(
                "band {name} needs 0 < low < high, got {low_hz}:{high_hz}"
            )));
        }
        Ok(BandSpec {
            name,
            low_hz,
            high_hz,
        })
    }

    pub fn theta() -> Self {
        BandSpec::new("theta", 4.0, 8.0).unwrap()
    }

    /// Bins `j` with `low ≤ j fs / T < high`.
    pub fn bins(&self, series_length: usize, sample_rate_hz: f64) -> Result<Vec<usize>> {
        if self.high_hz > sample_rate_hz / 2.0 {
            return Err(AdamantError::Parameter(format!(
                "band {} ends above the Nyquist frequency {} Hz",
                self.name,
                sample_rate_hz / 2.0
            )));
        }
        let step = sample_rate_hz / series_length as f64;
        let bins: Vec<usize> = (0..series_length)
            .filter(|&j| {
                let f = j as f64 * step;
                f >= self.low_hz && f < self.high_hz
            })
            .collect();
        if bins.is_empty() {
            return Err(AdamantError::BandResolution {
                band: self.name.clone(),
            });
        }
        Ok(bins)
    }
}

impl fmt::Display for BandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}", self.name, self.low_hz, self.high_hz)
    }
}

/// Parses `name=lo:hi`.
impl FromStr for BandSpec {
    type Err = AdamantError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || AdamantError::Parameter(format!("band {s:?} is not of the form name=lo:hi"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        BandSpec::new(name.trim(), lo, hi)
    }
}

/// Theta 4–8, alpha 8–12, beta 12–30 and gamma 30–45 Hz.
pub fn default_bands() -> Vec<BandSpec> {
    [("theta", 4.0, 8.0), ("alpha", 8.0, 12.0), ("beta", 12.0, 30.0), ("gamma", 30.0, 45.0)]
        .into_iter()
        .map(|(n, lo, hi)| BandSpec::new(n, lo, hi).unwrap())
        .collect()
}

/// Taper applied to every channel before the DFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    /// Hann taper rescaled to unit mean square.
    Hann,
}

/// Reusable DFT of a fixed length.
#[derive(Clone)]
pub struct Dft {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    /// `T^{-1/2} exp(−2πi j / T)`: normalization and the shift to `t = 1..T`.
    phase: Vec<Complex64>,
    taper: Option<Vec<f64>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize, window: Window) -> Result<Self> {
        if len < 2 {
            return Err(AdamantError::Parameter(format!(
                "series length must be at least 2, got {len}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(len);
        let norm = 1.0 / (len as f64).sqrt();
        let phase = (0..len)
            .map(|j| {
                Complex64::from_polar(norm, -2.0 * std::f64::consts::PI * j as f64 / len as f64)
            })
            .collect();
        let taper = match window {
            Window::Rectangular => None,
            Window::Hann => {
                let w: Vec<f64> = (1..=len)
                    .map(|t| {
                        let s = (std::f64::consts::PI * (t as f64 - 0.5) / len as f64).sin();
                        s * s
                    })
                    .collect();
                let rms = (w.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
                Some(w.into_iter().map(|v| v / rms).collect())
            }
        };
        Ok(Dft {
            len,
            fft,
            phase,
            taper,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coefficients at `ω_j = j/T`, `j = 0..T−1`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.len {
            return Err(AdamantError::Shape(format!(
                "series has length {}, transform expects {}",
                x.len(),
                self.len
            )));
        }
        let mut buf: Vec<Complex64> = match &self.taper {
            None => x.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            Some(w) => x.iter().zip(w).map(|(&v, &w)| Complex64::new(v * w, 0.0)).collect(),
        };
        self.fft.process(&mut buf);
        for (b, p) in buf.iter_mut().zip(&self.phase) {
            *b *= p;
        }
        Ok(buf)
    }
}

/// DFT of a single series with the `T^{-1/2}` normalization.
pub fn dft_coef(x: &[f64]) -> Result<Vec<Complex64>> {
    Dft::new(x.len(), Window::Rectangular)?.transform(x)
}

fn check_trial(trial: &DMatrix<f64>) -> Result<()> {
    if trial.iter().any(|v| !v.is_finite()) {
        return Err(AdamantError::Input("trial contains non-finite samples".into()));
    }
    Ok(())
}

/// `q × T` matrix of DFT coefficients, one row per channel.
fn channel_coefficients(dft: &Dft, trial: &DMatrix<f64>) -> Result<DMatrix<Complex64>> {
    let (q, t) = trial.shape();
    let mut d = DMatrix::zeros(q, t);
    let mut row = vec![0.0; t];
    for m in 0..q {
        for (k, r) in row.iter_mut().enumerate() {
            *r = trial[(m, k)];
        }
        for (j, c) in dft.transform(&row)?.into_iter().enumerate() {
            d[(m, j)] = c;
        }
    }
    Ok(d)
}

/// Per-bin spectral matrices `S_j = d(ω_j) d(ω_j)ᴴ` of a `channels × T`
/// trial.
pub fn spectral_matrix(trial: &DMatrix<f64>) -> Result<Vec<DMatrix<Complex64>>> {
    check_trial(trial)?;
    let dft = Dft::new(trial.ncols(), Window::Rectangular)?;
    let d = channel_coefficients(&dft, trial)?;
    Ok((0..trial.ncols())
        .map(|j| {
            let col = d.column(j);
            col * col.adjoint()
        })
        .collect())
}

/// Mean of per-bin spectral matrices over each band's bins, then over
/// trials. `spectra[k][j]` is bin `j` of trial `k`.
pub fn band_trial_average(
    spectra: &[Vec<DMatrix<Complex64>>],
    bands: &[BandSpec],
    sample_rate_hz: f64,
) -> Result<Vec<DMatrix<Complex64>>> {
    let first = spectra
        .first()
        .ok_or_else(|| AdamantError::Input("no trials".into()))?;
    let t = first.len();
    if spectra.iter().any(|s| s.len() != t) {
        return Err(AdamantError::Shape("trials have different lengths".into()));
    }
    let q = first.first().map_or(0, |m| m.nrows());
    bands
        .iter()
        .map(|band| {
            let bins = band.bins(t, sample_rate_hz)?;
            let mut acc = DMatrix::zeros(q, q);
            for trial in spectra {
                let mut inner = DMatrix::zeros(q, q);
                for &j in &bins {
                    inner += &trial[j];
                }
                acc += inner / Complex64::from(bins.len() as f64);
            }
            Ok(acc / Complex64::from(spectra.len() as f64))
        })
        .collect()
}

/// Coherence of one averaged spectral matrix. The diagonal is set to 1.
pub fn coherence_matrix(s: &DMatrix<Complex64>, band: &str) -> Result<DMatrix<f64>> {
    let q = s.nrows();
    let power: Vec<f64> = (0..q).map(|m| s[(m, m)].re).collect();
    if let Some(channel) = power.iter().position(|&p| !(p > 0.0)) {
        return Err(AdamantError::DegenerateChannel {
            channel,
            band: band.to_string(),
        });
    }
    Ok(DMatrix::from_fn(q, q, |m, n| {
        if m == n {
            1.0
        } else {
            s[(m, n)].norm_sqr() / (power[m] * power[n])
        }
    }))
}

/// Row-major strict upper triangle: `(0,1), (0,2), …, (q−2,q−1)`.
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let q = m.nrows();
    (0..q)
        .flat_map(|i| (i + 1..q).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect()
}

/// Coherence matrices of one subject, one per band.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceTensor {
    pub bands: Vec<BandSpec>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl CoherenceTensor {
    pub fn band(&self, name: &str) -> Option<&DMatrix<f64>> {
        self.bands
            .iter()
            .position(|b| b.name == name)
            .map(|i| &self.matrices[i])
    }

    /// Vectorized upper triangle of every band, concatenated in band order.
    pub fn features(&self) -> Vec<f64> {
        self.matrices.iter().flat_map(upper_triangle).collect()
    }
}

/// Band coherence of one subject's trials (`channels × T` each), computed
/// without materializing per-bin matrices.
pub fn subject_coherence(
    trials: &[DMatrix<f64>],
    bands: &[BandSpec],
    sample_rate_hz: f64,
    window: Window,
) -> Result<CoherenceTensor> {
    let first = trials
        .first()
        .ok_or_else(|| AdamantError::Input("subject has no trials".into()))?;
    let (q, t) = first.shape();
    if trials.iter().any(|tr| tr.shape() != (q, t)) {
        return Err(AdamantError::Shape("trials differ in shape".into()));
    }
    let dft = Dft::new(t, window)?;
    let bins = bands
        .iter()
        .map(|b| b.bins(t, sample_rate_hz))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![DMatrix::<Complex64>::zeros(q, q); bands.len()];
    for trial in trials {
        check_trial(trial)?;
        let d = channel_coefficients(&dft, trial)?;
        for (a, bins) in acc.iter_mut().zip(&bins) {
            let sub = DMatrix::from_fn(q, bins.len(), |m, k| d[(m, bins[k])]);
            *a += (&sub * sub.adjoint()) / Complex64::from(bins.len() as f64);
        }
    }
    let scale = Complex64::from(trials.len() as f64);
    let matrices = acc
        .into_iter()
        .zip(bands)
        .map(|(a, b)| coherence_matrix(&(a / scale), &b.name))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherenceTensor {
        bands: bands.to_vec(),
        matrices,
    })
}

/// Subjects × trials × channels × samples.
#[derive(Debug, Clone)]
pub struct TrialTensor {
    subjects: Vec<Vec<DMatrix<f64>>>,
    sample_rate_hz: f64,
}

impl TrialTensor {
    pub fn new(subjects: Vec<Vec<DMatrix<f64>>>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) {
            return Err(AdamantError::Parameter("sample rate must be positive".into()));
        }
        let shape = subjects
            .first()
            .and_then(|s| s.first())
            .map(|t| t.shape())
            .ok_or_else(|| AdamantError::Input("no trials".into()))?;
        for (i, s) in subjects.iter().enumerate() {
            if s.is_empty() {
                return Err(AdamantError::Input(format!("subject {i} has no trials")));
            }
            if s.iter().any(|t| t.shape() != shape) {
                return Err(AdamantError::Shape(format!(
                    "subject {i} has a trial whose shape differs from {}x{}",
                    shape.0, shape.1
                )));
            }
            if s.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
                return Err(AdamantError::Input(format!("subject {i} has non-finite samples")));
            }
        }
        Ok(TrialTensor {
            subjects,
            sample_rate_hz,
        })
    }

    pub fn subjects(&self) -> &[Vec<DMatrix<f64>>] {
        &self.subjects
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channels(&self) -> usize {
        self.subjects[0][0].nrows()
    }

    pub fn series_length(&self) -> usize {
        self.subjects[0][0].ncols()
    }

    /// Coherence of every subject, computed in parallel.
    pub fn coherence(&self, bands: &[BandSpec], window: Window) -> Result<Vec<CoherenceTensor>> {
        self.subjects
            .par_iter()
            .map(|s| subject_coherence(s, bands, self.sample_rate_hz, window))
            .collect()
    }
}

/// `n × (bands · q(q−1)/2)` matrix of vectorized coherences.
pub fn coherence_features(tensors: &[CoherenceTensor]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = tensors.iter().map(CoherenceTensor::features).collect();
    FeatureMatrix::from_rows(&rows)
}
