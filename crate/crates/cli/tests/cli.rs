use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sksd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sksd")).args(args).output().expect("binary runs")
}

fn simulate(dir: &Path, name: &str, dist: &str, n: usize, seed: u64) -> String {
    let path = dir.join(name);
    let p = path.to_str().unwrap().to_string();
    let out = sksd(&["simulate", "--dist", dist, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", &p]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    p
}

fn report(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn single_test_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "x.csv", r#"{"kind":"gaussian_shift","mu":0}"#, 100, 1);
    let args = ["test", "--data", &data, "--model", "gaussian", "--estimator", "mle", "--B", "200", "--seed", "7"];
    let mut a = report(&sksd(&args));
    let mut b = report(&sksd(&args));
    for r in [&mut a, &mut b] {
        r.as_object_mut().unwrap().remove("wall_time_s");
    }
    assert_eq!(a, b);
    assert_eq!(a["B"], 200);
    assert_eq!(a["n"], 100);
    assert_eq!(a["seed"], 7);
    assert_eq!(a["theta_hat"].as_array().unwrap().len(), 2);
    let p = a["p_value"].as_f64().unwrap();
    assert!(((p * 200.0).round() - p * 200.0).abs() < 1e-9);
    let summary = String::from_utf8_lossy(&sksd(&args).stderr).to_string();
    assert!(summary.contains("sksd: T ="), "{summary}");
}

#[test]
fn every_test_kind_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "x.csv", r#"{"kind":"gaussian_shift","mu":0}"#, 40, 2);
    for kind in ["sksd", "neyman-sksd", "ks", "w1", "mmd", "ad", "lilliefors", "lrt"] {
        let r = report(&sksd(&["test", "--data", &data, "--test", kind, "--B", "20", "--compact"]));
        let p = r["p_value"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
    }
    let r = report(&sksd(&["test", "--data", &data, "--kernel", "linear", "--pvalue-convention", "plus-one", "--B", "9"]));
    assert_eq!(r["convention"], "plus-one");
    let p = r["p_value"].as_f64().unwrap();
    assert!(((p * 10.0).round() - p * 10.0).abs() < 1e-9);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = sksd(&["test", "--data", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error") && err.contains("no data rows"), "{err}");

    let nan = dir.path().join("nan.csv");
    fs::write(&nan, "1\n2\nNaN\n").unwrap();
    assert_eq!(sksd(&["test", "--data", nan.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(sksd(&["test", "--data", "/nonexistent/file.csv"]).status.code(), Some(1));
    assert_eq!(sksd(&["test", "--bogus-flag"]).status.code(), Some(1));
    let ok = simulate(dir.path(), "ok.csv", r#"{"kind":"gaussian_shift","mu":0}"#, 10, 3);
    assert_eq!(sksd(&["test", "--data", &ok, "--test", "nope"]).status.code(), Some(1));
    assert_eq!(sksd(&["test", "--data", &ok, "--bandwidth", "-1"]).status.code(), Some(1));
    assert_eq!(sksd(&["--help"]).status.code(), Some(0));
}

#[test]
fn estimator_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let constant = dir.path().join("c.csv");
    fs::write(&constant, "x\n1\n1\n1\n1\n").unwrap();
    let out = sksd(&["test", "--data", constant.to_str().unwrap(), "--bandwidth", "1.0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn student_t_power_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let mut rejections = 0;
    for seed in 0..50u64 {
        let data = simulate(dir.path(), &format!("t{seed}.csv"), r#"{"kind":"student_t_shifted","nu":3}"#, 100, 500 + seed);
        let r = report(&sksd(&["test", "--data", &data, "--B", "200", "--seed", &seed.to_string(), "--compact"]));
        if r["p_value"].as_f64().unwrap() < 0.05 {
            rejections += 1;
        }
    }
    assert!(rejections >= 30, "only {rejections} of 50 seeds rejected");
}

const CONFIG: &str = r#"{
  "name": "smoke",
  "dgp": { "dist": { "kind": "gaussian_mixture", "w": 0.5, "delta": 0 }, "n": 60 },
  "sweep": { "param": "dgp.dist.delta", "values": [0, 1.5] },
  "test": { "model": { "kind": "gaussian" }, "estimator": { "kind": "mle_gaussian" }, "B": 30 },
  "replications": 8,
  "seed": 3
}"#;

#[test]
fn power_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, CONFIG).unwrap();
    let out_dir = dir.path().join("out");
    let run = |workers: &str| {
        let out = sksd(&["power", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(out_dir.join("smoke.csv")).unwrap()
    };
    let first = run("1");
    let header = first.lines().next().unwrap();
    assert_eq!(header, "sweep_value,replicate,statistic,p_value,reject,seed,elapsed_ms,theta_0,theta_1");
    assert!(!first.contains('\r'));
    assert_eq!(first.lines().count(), 1 + 2 * 8);

    // Identical apart from timings, whatever the worker count.
    let strip = |csv: &str| -> Vec<String> {
        csv.lines().map(|l| l.split(',').enumerate().filter(|(i, _)| *i != 6).map(|(_, v)| v).collect::<Vec<_>>().join(",")).collect()
    };
    assert_eq!(strip(&first), strip(&run("2")));

    // Recompute the rejection rates from the raw CSV and compare with the sidecar.
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("smoke.json")).unwrap()).unwrap();
    assert_eq!(sidecar["config"]["name"], "smoke");
    for agg in sidecar["aggregate"].as_array().unwrap() {
        let v = agg["sweep_value"].as_f64().unwrap();
        let rows: Vec<Vec<&str>> =
            first.lines().skip(1).map(|l| l.split(',').collect::<Vec<_>>()).filter(|f| f[0].parse::<f64>().unwrap() == v).collect();
        let rejects = rows.iter().filter(|f| f[4] == "1").count() as f64;
        let rate = rejects / rows.len() as f64;
        assert!((rate - agg["rejection_rate"].as_f64().unwrap()).abs() <= 1e-12);
    }

    let full = sksd(&["power", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--replications", "1", "--B", "5"]);
    assert!(full.status.success());
    assert_eq!(fs::read_to_string(out_dir.join("smoke.csv")).unwrap().lines().count(), 1 + 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"name":"x"}"#).unwrap();
    assert_eq!(sksd(&["power", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).unwrap();
            sksd::harness::ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 6, "expected one config per experiment, found {count}");
}
