//! Replicated power and size studies.
//!
//! Replicate `r` draws its design, response and permutations from seeds
//! derived from `(seed, r)` only, so every effect size in a study reuses the
//! same designs and noise (common random numbers) and results do not depend
//! on thread scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{adamant, ridge_grid, ridge_metrics, AdamantResult, PermutationPlan};
use crate::error::{AdamantError, Result};
use crate::matrices::FeatureMatrix;
use crate::rng::derive_seed;
use crate::simgen::{gen_design_cs, gen_eeg, gen_fe_response, gen_snp_groups, gen_vc_response, EegSimConfig, SimConfig};
use crate::spectral::{coherence_features, BandSpec, TrialTensor, Window};

const TAG_DESIGN: u64 = 1;
const TAG_RESPONSE: u64 = 2;
const TAG_PLAN: u64 = 3;

/// Which univariate response model to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearModel {
    /// Effect size is `σ_b`.
    Vc,
    /// Effect size is the fixed-effect magnitude `β`.
    Fe,
}

/// Shared replication settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub reps: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Replication {
    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(AdamantError::Parameter("need at least one replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AdamantError::Parameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn plan(&self, n: usize, rep: usize) -> Result<PermutationPlan> {
        PermutationPlan::new(n, self.permutations, derive_seed(self.seed, TAG_PLAN, rep as u64))
    }
}

/// Rejection rates at one effect size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub effect: f64,
    /// One rate per metric, in label order.
    pub per_metric: Vec<f64>,
    pub adamant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub effect_name: String,
    pub labels: Vec<String>,
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    /// One header line, then one row per effect size.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},adamant\n", self.effect_name, self.labels.join(","));
        for row in &self.rows {
            let cells: Vec<String> = std::iter::once(row.effect)
                .chain(row.per_metric.iter().copied())
                .chain(std::iter::once(row.adamant))
                .map(|v| v.to_string())
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let k = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r.per_metric[k]).collect())
    }
}

fn tabulate(
    effect_name: &str,
    labels: Vec<String>,
    effects: &[f64],
    alpha: f64,
    results: Vec<Vec<AdamantResult>>,
) -> PowerTable {
    let rows = effects
        .iter()
        .zip(results)
        .map(|(&effect, reps)| {
            let count = reps.len() as f64;
            let rate = |f: &dyn Fn(&AdamantResult) -> f64| {
                reps.iter().filter(|r| f(r) <= alpha).count() as f64 / count
            };
            PowerRow {
                effect,
                per_metric: (0..labels.len())
                    .map(|k| rate(&|r| r.per_metric()[k].p_value))
                    .collect(),
                adamant: rate(&|r| r.adaptive_p()),
            }
        })
        .collect();
    PowerTable {
        effect_name: effect_name.to_string(),
        labels,
        rows,
    }
}

/// Compound-symmetric design with a variance-components or fixed-effects
/// response; AdaMant over ridge X kernels with penalties `lambdas` against
/// the Euclidean response kernel.
pub fn univariate_power(
    model: LinearModel,
    config: &SimConfig,
    effects: &[f64],
    lambdas: &[f64],
    rep: &Replication,
) -> Result<PowerTable> {
    config.validate()?;
    rep.validate()?;
    let metrics = ridge_metrics(lambdas)?;
    let labels = metrics.iter().map(|m| m.label.clone()).collect();
    let results = effects
        .iter()
        .map(|&effect| {
            (0..rep.reps)
                .into_par_iter()
                .map(|r| {
                    let x = gen_design_cs(
                        config.n,
                        config.p,
                        config.rho,
                        derive_seed(rep.seed, TAG_DESIGN, r as u64),
                    )?;
                    let ys = derive_seed(rep.seed, TAG_RESPONSE, r as u64);
                    let y = match model {
                        LinearModel::Vc => {
                            gen_vc_response(&x, effect * effect, config.sigma_eps2, config.sparsity, ys)?
                        }
                        LinearModel::Fe => {
                            gen_fe_response(&x, effect, config.sigma_eps2, config.sparsity, ys)?
                        }
                    };
                    adamant(&x, &y.y, &metrics, &rep.plan(config.n, r)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let name = match model {
        LinearModel::Vc => "sigma_b",
        LinearModel::Fe => "beta",
    };
    Ok(tabulate(name, labels, effects, rep.alpha, results))
}

/// Vectorized band coherence of simulated EEG, one row per subject.
pub fn eeg_coherence_features(
    config: &EegSimConfig,
    snps: &FeatureMatrix,
    band: &BandSpec,
) -> Result<FeatureMatrix> {
    let data = gen_eeg(config, snps)?;
    let trials = TrialTensor::new(data.subjects, config.sample_rate_hz)?;
    coherence_features(&trials.coherence(std::slice::from_ref(band), Window::Rectangular)?)
}

/// SNP/EEG study: grouped SNPs, simulated EEG, band coherence features, and
/// AdaMant over the ridge grid `lambdas_x × lambdas_y`. The effect size is
/// `σ_g²`.
pub fn eeg_power(
    config: &EegSimConfig,
    snp_groups: usize,
    band: &BandSpec,
    effects: &[f64],
    lambdas_x: &[f64],
    lambdas_y: &[f64],
    rep: &Replication,
) -> Result<PowerTable> {
    rep.validate()?;
    let metrics = ridge_grid(lambdas_x, lambdas_y)?;
    let labels = metrics.iter().map(|m| m.label.clone()).collect();
    let results = effects
        .iter()
        .map(|&sigma_g2| {
            (0..rep.reps)
                .into_par_iter()
                .map(|r| {
                    let snps = gen_snp_groups(
                        config.n,
                        config.p_snp,
                        snp_groups,
                        derive_seed(rep.seed, TAG_DESIGN, r as u64),
                    )?;
                    let cfg = EegSimConfig {
                        sigma_g2,
                        seed: derive_seed(rep.seed, TAG_RESPONSE, r as u64),
                        ..config.clone()
                    };
                    let y = eeg_coherence_features(&cfg, &snps, band)?;
                    adamant(&snps, &y, &metrics, &rep.plan(config.n, r)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tabulate("sigma_g2", labels, effects, rep.alpha, results))
}
