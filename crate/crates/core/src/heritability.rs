//! Moment estimation of the proportion of variance explained.
//!
//! Under `Y ~ N(0, σ² I_q ⊗ G + σ_ε² I_q ⊗ I_n)` with `G = X X^T / p` of a
//! column-standardized `X` (so `tr(G) = n`) and `H = Y Y^T` of a standardized
//! response, `E tr(HG) = q σ² tr(G²) + n q σ_ε²`. Solving with
//! `σ² + σ_ε² = 1` gives
//!
//! ```text
//! ĥ² = (tr(HG)/q − n) / (tr(G²) − n)
//! ```
//!
//! and the expected matrix correlation
//! `E R(H, G) = (h² (tr(G²) − n) + n) / sqrt(tr(H²)/q · tr(G²))`.

use serde::{Deserialize, Serialize};

use crate::error::{AdamantError, Result};
use crate::matrices::{FeatureMatrix, GramMatrix, KernelSpec, PreprocessWarning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeritabilityEstimate {
    /// Raw moment estimate; may fall outside `[0, 1]`.
    pub h2_hat: f64,
    /// `h2_hat` clamped to `[0, 1]`.
    pub h2_clamped: f64,
    pub tr_g2: f64,
    pub tr_hg_over_q: f64,
    pub tr_h2_over_q: f64,
    pub n: usize,
    pub q: usize,
    pub warnings: Vec<PreprocessWarning>,
}

impl HeritabilityEstimate {
    /// Observed `R(H, G)` on the trace-normalized `G`.
    pub fn observed_correlation(&self) -> f64 {
        self.tr_hg_over_q * self.q as f64
            / (self.tr_h2_over_q * self.q as f64 * self.tr_g2).sqrt()
    }
}

/// `G = X X^T / p` of the column-standardized design.
pub fn relationship_matrix(x: &FeatureMatrix) -> Result<GramMatrix> {
    let xs = x.clone().standardized()?;
    let d = xs.data();
    GramMatrix::new(d * d.transpose() / xs.p() as f64, KernelSpec::Euclidean)
}

/// `H = Y Y^T` of the column-standardized response.
pub fn response_matrix(y: &FeatureMatrix) -> Result<GramMatrix> {
    let ys = y.clone().standardized()?;
    let d = ys.data();
    GramMatrix::new(d * d.transpose(), KernelSpec::Euclidean)
}

/// Method-of-moments `ĥ²`.
///
/// `G` is rescaled to `tr(G) = n` first; a rescaling by more than 1% is
/// recorded as a warning.
pub fn h2_moment(h: &GramMatrix, g: &GramMatrix, q: usize) -> Result<HeritabilityEstimate> {
    if h.n() != g.n() {
        return Err(AdamantError::Shape(format!(
            "H is {0}x{0}, G is {1}x{1}",
            h.n(),
            g.n()
        )));
    }
    if q == 0 {
        return Err(AdamantError::Parameter("q must be at least 1".into()));
    }
    let n = g.n();
    let nf = n as f64;
    let tr_g = g.trace();
    if !(tr_g > 0.0) {
        return Err(AdamantError::Degenerate("tr(G) is not positive".into()));
    }
    let factor = nf / tr_g;
    let mut warnings = Vec::new();
    if (factor - 1.0).abs() > 0.01 {
        warnings.push(PreprocessWarning::TraceRescaled { factor });
    }
    let g = g.scaled(factor);
    let tr_g2 = g.trace_product(&g);
    let tolerance = 1e-8;
    if (tr_g2 - nf).abs() < tolerance * nf {
        return Err(AdamantError::Unidentifiable { n, tolerance });
    }
    let qf = q as f64;
    let tr_hg_over_q = h.trace_product(&g) / qf;
    let h2_hat = (tr_hg_over_q - nf) / (tr_g2 - nf);
    Ok(HeritabilityEstimate {
        h2_hat,
        h2_clamped: h2_hat.clamp(0.0, 1.0),
        tr_g2,
        tr_hg_over_q,
        tr_h2_over_q: h.trace_product(h) / qf,
        n,
        q,
        warnings,
    })
}

/// `E R(H, G) = (h² (tr(G²) − n) + n) / sqrt(tr(H²/q) tr(G²))`.
pub fn expected_gram_correlation(h2: f64, tr_g2: f64, tr_h2_over_q: f64, n: usize) -> f64 {
    let nf = n as f64;
    (h2 * (tr_g2 - nf) + nf) / (tr_h2_over_q * tr_g2).sqrt()
}

/// Expected correlation as a function of `ξ = tr(G²)` for `q = 1` and
/// `tr(H²) = n²`: `ρ(ξ) = (h² (ξ − n) + n) / (n sqrt(ξ))`.
pub fn correlation_profile(h2: f64, n: usize, xi: f64) -> f64 {
    let nf = n as f64;
    (h2 * (xi - nf) + nf) / (nf * xi.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBounds {
    /// 1: interior minimum, `1 ≤ (1−h²)/h² ≤ n`; 2: `ρ` increasing,
    /// ratio `< 1`; 3: `ρ` decreasing, ratio `> n`.
    pub case: u8,
    pub lower: f64,
    pub upper: f64,
    pub argmin_tr_g2: f64,
    pub argmax_tr_g2: f64,
}

/// Range of `E R(H, G)` over `tr(G²) ∈ [n, n²]` for fixed `h²` and `n`.
///
/// The case is chosen by the noise-to-signal ratio `(1 − h²)/h²`. In case 1
/// the minimum `2 sqrt(h²(1−h²)/n)` sits at `ξ* = n(1−h²)/h²` and the
/// maximum is the larger endpoint value; for `h² < 1/(sqrt(n) + 1)` that is
/// `ρ(n) = 1/sqrt(n)` rather than `ρ(n²)`.
pub fn correlation_bounds(h2: f64, n: usize) -> Result<CorrelationBounds> {
    if !(h2 > 0.0 && h2 < 1.0) {
        return Err(AdamantError::Parameter(format!(
            "h2 must lie strictly inside (0, 1), got {h2}"
        )));
    }
    if n < 2 {
        return Err(AdamantError::Parameter(format!("n must be at least 2, got {n}")));
    }
    let nf = n as f64;
    let ratio = (1.0 - h2) / h2;
    let at_n = 1.0 / nf.sqrt();
    let at_n2 = h2 * (nf - 1.0) / nf + 1.0 / nf;
    let (left, right) = (nf, nf * nf);
    Ok(if ratio < 1.0 {
        CorrelationBounds {
            case: 2,
            lower: at_n,
            upper: at_n2,
            argmin_tr_g2: left,
            argmax_tr_g2: right,
        }
    } else if ratio > nf {
        CorrelationBounds {
            case: 3,
            lower: at_n2,
            upper: at_n,
            argmin_tr_g2: right,
            argmax_tr_g2: left,
        }
    } else {
        let (upper, argmax) = if at_n2 >= at_n {
            (at_n2, right)
        } else {
            (at_n, left)
        };
        CorrelationBounds {
            case: 1,
            lower: 2.0 * (h2 * (1.0 - h2) / nf).sqrt(),
            upper,
            argmin_tr_g2: nf * ratio,
            argmax_tr_g2: argmax,
        }
    })
}
