use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eigenprism"))
        .args(args)
        .env_remove("EIGENPRISM_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Gaussian design and response with θ² = σ² = 1.
fn write_data(dir: &Path, n: usize, p: usize) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let beta: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal) / (p as f64).sqrt()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let xs: String = x.iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n").collect();
    let ys: String = y.iter().map(|v| format!("{v}\n")).collect();
    let (xp, yp) = (dir.join("x.csv"), dir.join("y.csv"));
    std::fs::write(&xp, xs).unwrap();
    std::fs::write(&yp, ys).unwrap();
    (xp.to_str().unwrap().to_owned(), yp.to_str().unwrap().to_owned())
}

#[test]
fn mp_reports_b() {
    let v = json(&run(&["mp", "--gamma", "0.5"]));
    assert!((v["b"].as_f64().unwrap() - 1.5).abs() < 1e-3);
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_data(dir.path(), 40, 120);
    let args = ["fit", "--x", &x, "--y", &y, "--target", "theta2"];
    let first = run(&args);
    let v = json(&first);
    assert_eq!(v["estimand"], "theta_squared");
    let (lo, pt, hi) = (v["lower"].as_f64().unwrap(), v["point"].as_f64().unwrap(), v["upper"].as_f64().unwrap());
    assert!(0.0 <= lo && lo <= pt && pt <= hi);
    assert_eq!(first.stdout, run(&args).stdout);

    let table = run(&["--format", "table", "fit", "--x", &x, "--y", &y, "--target", "snr"]);
    assert_eq!(table.status.code(), Some(0));
    assert!(String::from_utf8(table.stdout).unwrap().contains("point"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["mp", "--gamma", "0.5", "--bogus"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_data(dir.path(), 10, 20);
    let out = run(&["fit", "--x", &x, "--y", &y, "--target", "snr", "--sigma2", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["fit", "--x", &x, "--y", &y, "--target", "error"]).status.code(), Some(2));
}

#[test]
fn library_errors_are_categorized() {
    let out = run(&["mp", "--gamma", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "InvalidGamma");

    let dir = tempfile::tempdir().unwrap();
    let (x, _) = write_data(dir.path(), 10, 20);
    let short = dir.path().join("short.csv");
    std::fs::write(&short, "1\n2\n3\n").unwrap();
    let out = run(&["fit", "--x", &x, "--y", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "DimensionMismatch");
}

#[test]
fn weights_satisfy_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let lam = dir.path().join("lambda.txt");
    std::fs::write(&lam, "3.0\n1.5\n1.0\n0.5\n0.25\n").unwrap();
    let v = json(&run(&["weights", "--lambda", lam.to_str().unwrap()]));
    let w: Vec<f64> = v["w"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let l = [3.0, 1.5, 1.0, 0.5, 0.25];
    assert!(w.iter().sum::<f64>().abs() < 1e-8);
    assert!((w.iter().zip(&l).map(|(a, b)| a * b).sum::<f64>() - 1.0).abs() < 1e-8);
    assert!(v["kkt_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn split_writes_both_parts() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = write_data(dir.path(), 21, 5);
    let prefix = dir.path().join("part");
    let out = run(&["split", "--x", &x, "--y", &y, "--fraction", "0.5", "--seed", "3", "--out-prefix", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = |s: &str| std::fs::read_to_string(dir.path().join(s)).unwrap().lines().filter(|l| !l.is_empty()).count();
    assert_eq!(rows("part.1.x.csv"), 11);
    assert_eq!(rows("part.2.x.csv"), 10);
    assert_eq!(rows("part.1.y.csv"), 11);
    assert_eq!(rows("part.2.y.csv"), 10);
}

#[test]
fn simulate_from_config_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(
        &cfg,
        r#"
[[scenario]]
n = 20
p = 60
design = { kind = "gaussian_iid" }
beta_family = { kind = "dense_gaussian_direction" }
theta2 = 1.0
sigma2 = 1.0
alpha = 0.05
trials = 30
seed = 4
target = "theta_squared"
"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let serial = run(&["simulate", "--config", c, "--threads", "1"]);
    let pooled = run(&["simulate", "--config", c, "--threads", "2"]);
    let v = json(&serial);
    assert_eq!(serial.stdout, pooled.stdout);
    let cov = v["empirical_coverage"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&cov));

    let flags = run(&["simulate", "--n", "20", "--p", "60", "--rho", "0.2,0.8", "--trials", "10", "--threads", "1"]);
    assert_eq!(flags.status.code(), Some(0));
    assert_eq!(String::from_utf8(flags.stdout).unwrap().lines().count(), 2);
}
