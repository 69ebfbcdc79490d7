use std::path::Path;
use std::process::{Command, Output};

use nystrom_mmd::data::{sample_correlated_gaussians, write_csv, SyntheticSpec};
use nystrom_mmd::harness::read_results;

fn nysmmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nysmmd"))
        .args(args)
        .env("NYSMMD_THREADS", "1")
        .output()
        .unwrap()
}

fn gaussian_file(dir: &Path, name: &str, rho: f64, n: usize, seed: u64) -> String {
    let path = dir.join(name);
    let data = sample_correlated_gaussians(&SyntheticSpec::correlated_gaussian(3, rho, n, seed)).unwrap();
    write_csv(&path, &data, None).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn test_command_reports_and_rejects_shift() {
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_file(dir.path(), "x.csv", 0.0, 300, 1);
    let y = gaussian_file(dir.path(), "y.csv", 0.9, 300, 2);
    let out = nysmmd(&["test", "--x", &x, "--y", &y, "--method", "nystrom-akrls", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["method"], "nystrom-akrls");
    assert_eq!(v["n_x"], 300);
    assert_eq!(v["ell"], 18);
    assert_eq!(v["reject"], true);
    assert!(v["statistic"].as_f64().unwrap() > v["threshold"].as_f64().unwrap());
}

#[test]
fn test_command_is_deterministic_and_keeps_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_file(dir.path(), "x.csv", 0.5, 80, 3);
    let y = gaussian_file(dir.path(), "y.csv", 0.5, 60, 4);
    let args = [
        "test", "--x", &x, "--y", &y, "--method", "rff", "--landmarks", "10", "--permutations", "39",
        "--keep-statistics",
    ];
    let a = nysmmd(&args);
    let b = nysmmd(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["all_statistics"].as_array().unwrap().len(), 40);
}

#[test]
fn identical_files_give_vanishing_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_file(dir.path(), "x.csv", 0.5, 50, 5);
    let out = nysmmd(&["test", "--x", &x, "--y", &x, "--method", "exact"]);
    let v = json(&out);
    assert!(v["statistic"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["ell"], serde_json::Value::Null);
    assert!(matches!(out.status.code(), Some(0) | Some(3)));
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    assert_eq!(nysmmd(&["test"]).status.code(), Some(2));
    assert_eq!(nysmmd(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nysmmd(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let x = gaussian_file(dir.path(), "x.csv", 0.5, 20, 6);
    let out = nysmmd(&["test", "--x", &x, "--y", &x, "--method", "magic"]);
    assert_eq!(out.status.code(), Some(2));
    let out = nysmmd(&["test", "--x", &x, "--y", &x, "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = dir.path().join("missing.csv");
    let out = nysmmd(&["test", "--x", &x, "--y", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn level_writes_results_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("level.csv");
    let out = nysmmd(&[
        "level", "--method", "nystrom-uniform", "--method", "exact", "--landmarks", "8", "--n", "30",
        "--reps", "12", "--permutations", "19", "--output", csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("method,ell,n_x,n_y,param,rate,wilson_low,wilson_high,mean_runtime_s,reps"));
    let rows = read_results(&text).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.trials == 12 && r.param == 0.5));
}

#[test]
fn power_reads_json_spec_and_bench_summarizes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{
            "scenario": {"type": "correlated_gaussian", "d": 3, "rho_x": 0.5, "rho_y": [0.5, 0.95]},
            "methods": ["rff"],
            "landmarks": [8],
            "sample_sizes": [40],
            "permutations": 19,
            "repetitions": 10,
            "seed": 9
        }"#,
    )
    .unwrap();
    let out = nysmmd(&["power", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_results(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].param, 0.95);

    let out = nysmmd(&["bench", "--spec", spec.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("runtime_s"));

    std::fs::write(&spec, "{\"scenario\": 3}").unwrap();
    assert_eq!(nysmmd(&["power", "--spec", spec.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(nysmmd(&["power", "--n", "30"]).status.code(), Some(2));
}

#[test]
fn gen_writes_gaussian_and_mixture_samples() {
    let dir = tempfile::tempdir().unwrap();
    let bg = dir.path().join("bg.csv");
    let sig = dir.path().join("sig.csv");
    let mix = dir.path().join("mix.csv");
    for (path, rho) in [(&bg, "0.0"), (&sig, "0.8")] {
        let out = nysmmd(&["gen", "gaussian", "--n", "100", "--rho", rho, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let out = nysmmd(&[
        "gen", "mixture", "--background", bg.to_str().unwrap(), "--signal", sig.to_str().unwrap(),
        "--alpha-mix", "0.3", "--n", "50", "--seed", "2", "--out", mix.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let data = nystrom_mmd::data::load_csv(&mix, false).unwrap();
    assert_eq!((data.n(), data.d()), (50, 3));
    let out = nysmmd(&["gen", "gaussian", "--n", "10", "--rho", "-0.9", "--out", mix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
