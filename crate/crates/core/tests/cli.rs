use std::path::Path;
use std::process::{Command, Output};

use adamant::files::write_matrix;
use adamant::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn adamant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adamant"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn normal(seed: u64, n: usize, p: usize) -> DMatrix<f64> {
    let mut rng = substream(seed, 0);
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn write(dir: &Path, name: &str, m: &DMatrix<f64>) -> String {
    let path = dir.join(name);
    write_matrix(&path, m, None).unwrap();
    path.display().to_string()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn single_metric_null_p_value_is_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &normal(1, 30, 5));
    let y = write(dir.path(), "y.csv", &normal(2, 30, 1));
    let v = json(&adamant(&["test", "--x", &x, "--y", &y, "--permutations", "199"]));
    let p = v["p_adamant"].as_f64().unwrap();
    assert!((1.0 / 200.0..=1.0).contains(&p));
    assert_eq!(v["per_metric"].as_array().unwrap().len(), 1);
    assert_eq!(v["B"], 199);
    // With one metric the adaptive p-value is the metric's own.
    assert_eq!(v["per_metric"][0]["p_value"].as_f64().unwrap(), p);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(adamant(&["test", "--bogus"]).status.code(), Some(2));
    assert_eq!(adamant(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(adamant(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_file_and_bad_cell_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv").display().to_string();
    let out = adamant(&["test", "--x", &missing, "--y", &missing]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let bad = bad.display().to_string();
    let out = adamant(&["test", "--x", &bad, "--y", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("oops"), "{msg}");
}

#[test]
fn constant_design_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &DMatrix::from_element(20, 3, 1.5));
    let y = write(dir.path(), "y.csv", &normal(3, 20, 1));
    let out = adamant(&["test", "--x", &x, "--y", &y, "--kernel-x", "mahalanobis"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn replay_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &normal(4, 25, 8));
    let y = write(dir.path(), "y.csv", &normal(5, 25, 2));
    let out = dir.path().join("r.json");
    let out_s = out.display().to_string();
    let first = adamant(&[
        "test", "--x", &x, "--y", &y, "--lambda-x", "1,inf", "--kernel-y", "mahalanobis",
        "--permutations", "99", "--seed", "17", "--out", &out_s,
    ]);
    assert!(first.status.success());
    let before = std::fs::read(&out).unwrap();
    let saved = dir.path().join("saved.json");
    std::fs::rename(&out, &saved).unwrap();
    let replay = adamant(&["test", "--replay", &saved.display().to_string()]);
    assert!(replay.status.success(), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), before);

    let v: Value = serde_json::from_slice(&before).unwrap();
    assert_eq!(v["manifest"]["kernel_x"]["lambdas"], serde_json::json!(["1", "inf"]));
    assert_eq!(v["seed"], 17);
}

#[test]
fn heritability_of_identical_kernels_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let x = normal(6, 15, 30);
    let g = &x * x.transpose();
    let g = g.scale(15.0 / g.trace());
    let gp = write(dir.path(), "g.csv", &g);
    let v = json(&adamant(&["heritability", "--g", &gp, "--h", &gp]));
    assert!((v["h2_hat"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn heritability_from_raw_data_reports_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.csv", &normal(7, 40, 60));
    let y = write(dir.path(), "y.csv", &normal(8, 40, 1));
    let v = json(&adamant(&["heritability", "--x", &x, "--y", &y]));
    let h2 = v["h2_clamped"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&h2));
    if h2 > 0.0 && h2 < 1.0 {
        let b = &v["bounds"];
        assert!(b["lower"].as_f64().unwrap() <= b["upper"].as_f64().unwrap());
    }
}

#[test]
fn coherence_writes_one_row_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let trials: Vec<DMatrix<f64>> = (0..3).map(|t| normal(10 + t, 4, 256)).collect();
    let mut inputs = Vec::new();
    for s in 0..2 {
        let p = dir.path().join(format!("s{s}.txt"));
        adamant::files::write_trials(&p, &trials).unwrap();
        inputs.push(p.display().to_string());
    }
    let out = dir.path().join("coh.csv");
    let mut args = vec!["coherence"];
    args.extend(inputs.iter().map(String::as_str));
    let out_s = out.display().to_string();
    args.extend(["--bands", "theta=4:8,alpha=8:13", "--out", &out_s]);
    let res = adamant(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    // Two bands with 4 choose 2 channel pairs each.
    assert_eq!(lines[0].split(',').count(), 12);
    assert!(lines[0].starts_with("theta_c1_c2"));
    assert_eq!(lines[1], lines[2]);
    assert!(out.with_file_name("coh.csv.manifest.json").exists());
}

#[test]
fn simulate_writes_a_power_table() {
    let out = adamant(&[
        "simulate", "vc", "--n", "30", "--p", "20", "--reps", "5", "--permutations", "19",
        "--sigma-b", "0,0.5", "--lambda", "10,inf",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sigma_b,ridge(10)|euclidean,euclidean|euclidean,adamant");
    assert_eq!(lines.len(), 3);
}
