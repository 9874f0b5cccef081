//! The `adamant` command line.
//!
//! ```text
//! adamant test --x snps.csv --y coh.csv --lambda-x 10,100,inf --lambda-y 10,inf --out r.json
//! adamant simulate vc --n 200 --p 300 --sigma-b 0.035 --reps 500 --out power.csv
//! adamant coherence s01.txt s02.txt --fs 256 --bands theta=4:8 --out coh.csv
//! adamant heritability --x snps.csv --y coh.csv --header
//! ```
//!
//! Exit status is 0 on success, 2 for usage and input errors and 3 for
//! numerical degeneracy.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::{adamant, MetricPair, PermutationPlan, EEG_LAMBDA_GRID, UNIVARIATE_LAMBDA_GRID};
use crate::error::{AdamantError, Result};
use crate::files::{
    load_matrix, load_trials, read_json, to_json, write_json, write_table, KernelGrid, RunManifest,
    TestReport,
};
use crate::heritability::{
    correlation_bounds, expected_gram_correlation, h2_moment, relationship_matrix, response_matrix,
    CorrelationBounds, HeritabilityEstimate,
};
use crate::matrices::{GramMatrix, KernelSpec};
use crate::simgen::{EegSimConfig, SimConfig};
use crate::spectral::{coherence_features, default_bands, BandSpec, TrialTensor, Window};
use crate::study::{eeg_power, univariate_power, LinearModel, Replication};

/// Environment fallback for `--threads`.
pub const THREADS_ENV: &str = "ADAMANT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "adamant", version, about = "Adaptive Mantel test")]
struct Cli {
    /// Worker threads (default: ADAMANT_THREADS, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Adaptive Mantel test of two feature matrices
    Test(TestArgs),
    /// Power study on simulated data
    Simulate(SimulateArgs),
    /// Band coherence features from EEG trial files
    Coherence(CoherenceArgs),
    /// Moment estimate of variance explained
    Heritability(HeritabilityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelKind {
    Euclidean,
    Mahalanobis,
    Ridge,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long, required_unless_present = "replay")]
    x: Option<PathBuf>,
    #[arg(long, required_unless_present = "replay")]
    y: Option<PathBuf>,
    /// Input files start with a header row of feature names
    #[arg(long)]
    header: bool,
    #[arg(long, value_enum)]
    kernel_x: Option<KernelKind>,
    /// Ridge penalties for X, e.g. 10,100,inf
    #[arg(long, value_delimiter = ',')]
    lambda_x: Vec<f64>,
    #[arg(long, value_enum)]
    kernel_y: Option<KernelKind>,
    #[arg(long, value_delimiter = ',')]
    lambda_y: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    permutations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-run from the manifest embedded in an earlier result
    #[arg(long, conflicts_with_all = ["x", "y"])]
    replay: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimModel {
    Vc,
    Fe,
    Eeg,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    model: SimModel,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Features (SNPs for eeg)
    #[arg(long, default_value_t = 300)]
    p: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_eps2: f64,
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    /// Effect sizes for vc
    #[arg(long, value_delimiter = ',', default_value = "0,0.035")]
    sigma_b: Vec<f64>,
    /// Effect sizes for fe
    #[arg(long, value_delimiter = ',', default_value = "0,0.05")]
    beta: Vec<f64>,
    /// Effect sizes for eeg
    #[arg(long, value_delimiter = ',', default_value = "0,100")]
    sigma_g2: Vec<f64>,
    /// X penalties (default: the univariate grid for vc/fe, 10,100,inf for eeg)
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Y penalties for eeg
    #[arg(long, value_delimiter = ',', default_value = "10,100,inf")]
    lambda_y: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    channels: usize,
    #[arg(long, default_value_t = 10)]
    linked: usize,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    series_length: usize,
    #[arg(long, default_value_t = 256.0)]
    fs: f64,
    #[arg(long, default_value_t = 2.0)]
    noise_sd: f64,
    #[arg(long, default_value = "theta=4:8")]
    band: BandSpec,
    #[arg(long, default_value_t = 500)]
    reps: usize,
    #[arg(long, default_value_t = 500)]
    permutations: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output file (default: stdout); a manifest is written alongside
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowArg {
    Rectangular,
    Hann,
}

#[derive(Debug, Args)]
struct CoherenceArgs {
    /// One file per subject
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 256.0)]
    fs: f64,
    /// Bands as name=lo:hi (default theta, alpha, beta, gamma)
    #[arg(long, value_delimiter = ',')]
    bands: Vec<BandSpec>,
    #[arg(long, value_enum, default_value = "rectangular")]
    window: WindowArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HeritabilityArgs {
    #[arg(long, requires = "y", conflicts_with_all = ["g", "h"])]
    x: Option<PathBuf>,
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Precomputed relationship matrix
    #[arg(long, requires = "h")]
    g: Option<PathBuf>,
    /// Precomputed response Gram matrix
    #[arg(long, requires = "g")]
    h: Option<PathBuf>,
    /// Response dimension for --g/--h
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the command line and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("adamant: {e}");
            e.exit_code()
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(v.trim().parse().map_err(|_| {
                AdamantError::Parameter(format!("{THREADS_ENV}={v:?} is not a thread count"))
            })?),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(AdamantError::Parameter("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn run(cli: Cli) -> Result<()> {
    let command = cli.command;
    match thread_count(cli.threads)? {
        None => dispatch(command),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AdamantError::Parameter(format!("thread pool: {e}")))?
            .install(|| dispatch(command)),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Test(a) => run_test(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Coherence(a) => run_coherence(a),
        Command::Heritability(a) => run_heritability(a),
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            print!("{}", to_json(value)?);
            Ok(())
        }
    }
}

fn emit_table(out: Option<&Path>, csv: &str, manifest: &RunManifest) -> Result<()> {
    match out {
        Some(p) => write_table(p, csv, manifest),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn kind_name(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::Euclidean => "euclidean",
        KernelKind::Mahalanobis => "mahalanobis",
        KernelKind::Ridge => "ridge",
    }
}

/// Kernel list for one side. A penalty list without a kernel implies ridge;
/// neither gives the Euclidean kernel.
fn kernel_grid(kind: Option<KernelKind>, lambdas: &[f64], side: &str) -> Result<(KernelGrid, Vec<KernelSpec>)> {
    let kind = match (kind, lambdas.is_empty()) {
        (None, true) => KernelKind::Euclidean,
        (None, false) => KernelKind::Ridge,
        (Some(KernelKind::Ridge), true) => {
            return Err(AdamantError::Parameter(format!(
                "--kernel-{side} ridge needs --lambda-{side}"
            )))
        }
        (Some(k @ (KernelKind::Euclidean | KernelKind::Mahalanobis)), false) => {
            return Err(AdamantError::Parameter(format!(
                "--lambda-{side} only applies to the ridge kernel, not {}",
                kind_name(k)
            )))
        }
        (Some(k), _) => k,
    };
    let specs = match kind {
        KernelKind::Euclidean => vec![KernelSpec::Euclidean],
        KernelKind::Mahalanobis => vec![KernelSpec::Mahalanobis],
        KernelKind::Ridge => lambdas.iter().map(|&l| KernelSpec::ridge(l)).collect::<Result<_>>()?,
    };
    let grid = KernelGrid {
        kind: kind_name(kind).to_string(),
        lambdas: lambdas.iter().map(|l| l.to_string()).collect(),
    };
    Ok((grid, specs))
}

fn grid_from_manifest(grid: &Option<KernelGrid>) -> Result<(Option<KernelKind>, Vec<f64>)> {
    let Some(g) = grid else {
        return Ok((None, Vec::new()));
    };
    let kind = KernelKind::from_str(&g.kind, true)
        .map_err(|_| AdamantError::Parameter(format!("unknown kernel {:?} in manifest", g.kind)))?;
    let lambdas = g
        .lambdas
        .iter()
        .map(|l| {
            l.parse()
                .map_err(|_| AdamantError::Parameter(format!("bad penalty {l:?} in manifest")))
        })
        .collect::<Result<_>>()?;
    Ok((Some(kind), lambdas))
}

fn load_manifest(path: &Path) -> Result<RunManifest> {
    let value: serde_json::Value = read_json(path)?;
    let inner = value.get("manifest").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner)?)
}

fn run_test(mut a: TestArgs) -> Result<()> {
    if let Some(replay) = a.replay.take() {
        let m = load_manifest(&replay)?;
        if m.command != "test" || m.inputs.len() != 2 {
            return Err(AdamantError::Input(format!(
                "{} does not hold a test manifest",
                replay.display()
            )));
        }
        a.x = Some(PathBuf::from(&m.inputs[0]));
        a.y = Some(PathBuf::from(&m.inputs[1]));
        a.header = m.settings.get("header").and_then(|v| v.as_bool()).unwrap_or(false);
        (a.kernel_x, a.lambda_x) = grid_from_manifest(&m.kernel_x)?;
        (a.kernel_y, a.lambda_y) = grid_from_manifest(&m.kernel_y)?;
        a.permutations = m.permutations.unwrap_or(a.permutations);
        a.seed = m.master_seed;
        if a.out.is_none() {
            a.out = m.output.map(PathBuf::from);
        }
    }
    let (xp, yp) = (a.x.expect("clap requires --x"), a.y.expect("clap requires --y"));
    let (gx, kx) = kernel_grid(a.kernel_x, &a.lambda_x, "x")?;
    let (gy, ky) = kernel_grid(a.kernel_y, &a.lambda_y, "y")?;
    let metrics: Vec<MetricPair> = kx
        .iter()
        .flat_map(|x| ky.iter().map(move |y| MetricPair::new(x.clone(), y.clone())))
        .collect();

    let x = load_matrix(&xp, a.header)?;
    let y = load_matrix(&yp, a.header)?;
    if x.n() != y.n() {
        return Err(AdamantError::Shape(format!(
            "{} has {} rows, {} has {}",
            xp.display(),
            x.n(),
            yp.display(),
            y.n()
        )));
    }
    let plan = PermutationPlan::new(x.n(), a.permutations, a.seed)?;
    let result = adamant(&x, &y, &metrics, &plan)?;

    let mut manifest = RunManifest::new("test", a.seed);
    manifest.inputs = vec![path_string(&xp), path_string(&yp)];
    manifest.kernel_x = Some(gx);
    manifest.kernel_y = Some(gy);
    manifest.permutations = Some(a.permutations);
    manifest.output = a.out.as_deref().map(path_string);
    manifest.settings = serde_json::json!({ "header": a.header });
    emit_json(a.out.as_deref(), &TestReport::new(manifest, &result))
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let rep = Replication {
        reps: a.reps,
        permutations: a.permutations,
        alpha: a.alpha,
        seed: a.seed,
    };
    let mut manifest = RunManifest::new("simulate", a.seed);
    manifest.permutations = Some(a.permutations);
    manifest.output = a.out.as_deref().map(path_string);
    let table = match a.model {
        SimModel::Vc | SimModel::Fe => {
            let cfg = SimConfig {
                n: a.n,
                p: a.p,
                rho: a.rho,
                sigma_eps2: a.sigma_eps2,
                sparsity: a.sparsity,
                seed: a.seed,
                ..SimConfig::default()
            };
            let lambdas = if a.lambda.is_empty() {
                UNIVARIATE_LAMBDA_GRID.to_vec()
            } else {
                a.lambda.clone()
            };
            let (model, effects) = if a.model == SimModel::Vc {
                (LinearModel::Vc, &a.sigma_b)
            } else {
                (LinearModel::Fe, &a.beta)
            };
            manifest.kernel_x = Some(ridge_grid_record(&lambdas));
            manifest.kernel_y = Some(KernelGrid {
                kind: "euclidean".into(),
                lambdas: Vec::new(),
            });
            manifest.settings = serde_json::json!({
                "model": model,
                "config": cfg,
                "effects": effects,
                "reps": a.reps,
                "alpha": a.alpha,
            });
            univariate_power(model, &cfg, effects, &lambdas, &rep)?
        }
        SimModel::Eeg => {
            let cfg = EegSimConfig {
                n: a.n,
                p_snp: a.p,
                channels: a.channels,
                linked_channels: a.linked,
                series_length: a.series_length,
                sample_rate_hz: a.fs,
                trials: a.trials,
                channel_noise_sd: a.noise_sd,
                seed: a.seed,
                ..EegSimConfig::default()
            };
            let lambdas = if a.lambda.is_empty() {
                EEG_LAMBDA_GRID.to_vec()
            } else {
                a.lambda.clone()
            };
            manifest.kernel_x = Some(ridge_grid_record(&lambdas));
            manifest.kernel_y = Some(ridge_grid_record(&a.lambda_y));
            manifest.settings = serde_json::json!({
                "model": "eeg",
                "config": cfg,
                "snp_groups": a.groups,
                "band": a.band,
                "effects": a.sigma_g2,
                "reps": a.reps,
                "alpha": a.alpha,
            });
            eeg_power(&cfg, a.groups, &a.band, &a.sigma_g2, &lambdas, &a.lambda_y, &rep)?
        }
    };
    emit_table(a.out.as_deref(), &table.to_csv(), &manifest)
}

fn ridge_grid_record(lambdas: &[f64]) -> KernelGrid {
    KernelGrid {
        kind: "ridge".into(),
        lambdas: lambdas.iter().map(|l| l.to_string()).collect(),
    }
}

fn run_coherence(a: CoherenceArgs) -> Result<()> {
    let bands = if a.bands.is_empty() {
        default_bands()
    } else {
        a.bands.clone()
    };
    let subjects = a
        .inputs
        .iter()
        .map(load_trials)
        .collect::<Result<Vec<_>>>()?;
    let tensor = TrialTensor::new(subjects, a.fs)?;
    let window = match a.window {
        WindowArg::Rectangular => Window::Rectangular,
        WindowArg::Hann => Window::Hann,
    };
    let coherence = tensor.coherence(&bands, window)?;
    let features = coherence_features(&coherence)?;

    let q = tensor.channels();
    let names: Vec<String> = bands
        .iter()
        .flat_map(|b| {
            (1..=q).flat_map(move |i| (i + 1..=q).map(move |j| format!("{}_c{i}_c{j}", b.name)))
        })
        .collect();
    let mut csv = names.join(",");
    csv.push('\n');
    for i in 0..features.n() {
        let row: Vec<String> = features.data().row(i).iter().map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let mut manifest = RunManifest::new("coherence", 0);
    manifest.inputs = a.inputs.iter().map(|p| path_string(p)).collect();
    manifest.output = a.out.as_deref().map(path_string);
    manifest.settings = serde_json::json!({
        "sample_rate_hz": a.fs,
        "bands": bands,
        "window": window,
    });
    emit_table(a.out.as_deref(), &csv, &manifest)
}

#[derive(Debug, Serialize)]
struct HeritabilityReport {
    manifest: RunManifest,
    #[serde(flatten)]
    estimate: HeritabilityEstimate,
    observed_correlation: f64,
    expected_correlation: f64,
    /// Range of the expected correlation at the clamped estimate; absent
    /// when the estimate is clamped to 0 or 1.
    bounds: Option<CorrelationBounds>,
}

fn run_heritability(a: HeritabilityArgs) -> Result<()> {
    let mut manifest = RunManifest::new("heritability", 0);
    let (h, g, q) = match (&a.x, &a.y, &a.g, &a.h) {
        (Some(xp), Some(yp), _, _) => {
            manifest.inputs = vec![path_string(xp), path_string(yp)];
            let x = load_matrix(xp, a.header)?;
            let y = load_matrix(yp, a.header)?;
            if x.n() != y.n() {
                return Err(AdamantError::Shape(format!(
                    "X has {} rows, Y has {}",
                    x.n(),
                    y.n()
                )));
            }
            (response_matrix(&y)?, relationship_matrix(&x)?, y.p())
        }
        (_, _, Some(gp), Some(hp)) => {
            manifest.inputs = vec![path_string(gp), path_string(hp)];
            let g = load_matrix(gp, a.header)?.into_inner();
            let h = load_matrix(hp, a.header)?.into_inner();
            (
                GramMatrix::new(h, KernelSpec::Euclidean)?,
                GramMatrix::new(g, KernelSpec::Euclidean)?,
                a.q,
            )
        }
        _ => {
            return Err(AdamantError::Parameter(
                "give either --x and --y or --g and --h".into(),
            ))
        }
    };
    manifest.output = a.out.as_deref().map(path_string);
    manifest.settings = serde_json::json!({ "header": a.header, "q": q });
    let est = h2_moment(&h, &g, q)?;
    let bounds = correlation_bounds(est.h2_clamped, est.n).ok();
    let report = HeritabilityReport {
        manifest,
        observed_correlation: est.observed_correlation(),
        expected_correlation: expected_gram_correlation(est.h2_hat, est.tr_g2, est.tr_h2_over_q, est.n),
        estimate: est,
        bounds,
    };
    emit_json(a.out.as_deref(), &report)
}
