use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn srgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srgc")).args(args).output().expect("run srgc")
}

fn ok(args: &[&str]) -> String {
    let out = srgc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const FIG1: [&str; 13] = ["model", "random", "--nx", "3", "--ny", "5", "-p", "7", "--rho", "0.9", "--gamma", "1", "--null"];

#[test]
fn random_model_is_reproducible_and_inspectable() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "m.json");
    let mut args = FIG1.to_vec();
    args.extend(["--seed", "42", "--out", &m]);
    ok(&args);
    let first = fs::read(&m).unwrap();
    ok(&args);
    assert_eq!(first, fs::read(&m).unwrap());

    let info = json(&["model", "info", &m]);
    assert!((info["spectral_radius"].as_f64().unwrap() - 0.9).abs() < 1e-8);
    assert!((info["log_generalised_correlation"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(info["gc"].as_f64().unwrap(), 0.0);
    assert_eq!(info["null_weights"]["count"], 35);

    let law = json(&["nulldist", &m]);
    assert_eq!(law["law"]["weights"].as_array().unwrap().len(), 35);
    assert_eq!(law["law"]["multiplicity"], 3);
    assert_eq!(law["quantiles"].as_array().unwrap().len(), 3);
    // Full band reproduces the time law.
    let band = json(&["nulldist", &m, "--band", "0", "6.283185307179586"]);
    for (a, b) in law["law"]["weights"].as_array().unwrap().iter().zip(band["law"]["weights"].as_array().unwrap()) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-8);
    }
    // The law inside the nulldist output reads back.
    let lf = path(dir.path(), "law.json");
    fs::write(&lf, serde_json::to_string(&law).unwrap()).unwrap();
    let back = srgc::null_dist::read_law_file(Path::new(&lf)).unwrap();
    assert_eq!(back.weights().len(), 35);
}

#[test]
fn target_gc_models_report_their_gc() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "g.json");
    ok(&["model", "random", "--nx", "3", "--ny", "5", "-p", "7", "--rho", "0.9", "--gamma", "1", "--gc", "0.007", "--seed", "1", "--out", &m]);
    let info = json(&["model", "info", &m]);
    assert!((info["gc"].as_f64().unwrap() - 0.007).abs() < 1e-6);
    assert_eq!(info["is_null"], false);

    let t = json(&["gc", "--model", &m])["value"].as_f64().unwrap();
    let b = json(&["gc", "--model", &m, "--band", "0", "6.283185307179586"])["value"].as_f64().unwrap();
    assert!((t - b).abs() < 1e-6);
    // Hz at fs = 2 maps [0, 1] Hz to [0, π].
    let hz = json(&["gc", "--model", &m, "--band", "0", "1", "--hz", "--fs", "2"])["value"].as_f64().unwrap();
    let rad = json(&["gc", "--model", &m, "--band", "0", &PI.to_string()])["value"].as_f64().unwrap();
    assert!((hz - rad).abs() < 1e-12);

    let csv = ok(&["gc", "--model", &m, "--spectrum", "512", "--format", "csv"]);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 512);
    let mean = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum::<f64>() / 512.0;
    assert!((mean - t).abs() < 1e-6);
}

#[test]
fn white_noise_law_matches_chi_squared() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "wn.json");
    fs::write(&m, r#"{"n":2,"p":1,"A":[[0,0],[0,0]],"Sigma":[[1,0],[0,1]],"partition":{"nx":1,"ny":1}}"#).unwrap();
    let out = json(&["nulldist", &m]);
    assert_eq!(out["law"]["weights"][0].as_f64().unwrap(), 1.0);
    let chi = ChiSquared::new(1.0).unwrap();
    for q in out["quantiles"].as_array().unwrap() {
        let level = q["level"].as_f64().unwrap();
        assert!((q["value"].as_f64().unwrap() - chi.inverse_cdf(level)).abs() < 1e-6);
    }
    assert_eq!(json(&["gc", "--model", &m])["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_and_test() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "m.json");
    ok(&["model", "random", "--nx", "1", "--ny", "2", "-p", "2", "--rho", "0.8", "--gamma", "0.5", "--null", "--seed", "3", "--out", &m]);
    let s = path(dir.path(), "s.csv");
    ok(&["simulate", &m, "-N", "3000", "--seed", "8", "--out", &s]);
    let text = fs::read_to_string(&s).unwrap();
    assert_eq!(text.lines().count(), 3001);
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 3);
    assert_eq!(text, ok(&["simulate", &m, "-N", "3000", "--seed", "8"]));
    assert_ne!(text, ok(&["simulate", &m, "-N", "3000", "--seed", "9"]));

    for method in ["projection", "lr"] {
        let r = json(&["test", &s, "--partition", "1", "--order", "2", "--method", method]);
        let (p, c, x) = (r["p_value"].as_f64().unwrap(), r["critical"].as_f64().unwrap(), r["scaled"].as_f64().unwrap());
        assert_eq!(r["reject"].as_bool().unwrap(), p < 0.05);
        assert_eq!(r["reject"].as_bool().unwrap(), x > c);
        assert_eq!(r["fitted_order"], 2);
    }
    let sel = json(&["test", &s, "--partition", "1", "--select", "bic", "--pmax", "6"]);
    assert_eq!(sel["fitted_order"], 2);
    let band = json(&["test", &s, "--partition", "1", "--order", "2", "--band", "0.5", "2.0"]);
    assert_eq!(band["law"]["generalized_chi_squared"]["kind"], "band");

    let g = json(&["gc", "--data", &s, "-p", "2", "--partition", "1", "--lr"]);
    assert!(g["single_regression"]["value"].as_f64().unwrap() >= 0.0);
    assert!(g["likelihood_ratio"]["value"].as_f64().unwrap() >= 0.0);
}

#[test]
fn experiment_output_is_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    fs::write(
        &cfg,
        r#"{"design":"random_var","nx":1,"ny":1,"p":1,"rho":0.5,"gamma":0.5,"mode":"null",
            "n_list":[256,512],"models":4,"trials_per_model":8,"alpha":0.05,
            "tests":["projection","lr"],"order_policy":{"fixed":1}}"#,
    )
    .unwrap();
    let one = path(dir.path(), "one.json");
    let four = path(dir.path(), "four.json");
    ok(&["experiment", &cfg, "--workers", "1", "--seed", "5", "--out", &one]);
    ok(&["experiment", &cfg, "--workers", "4", "--seed", "5", "--out", &four]);
    assert_eq!(fs::read(&one).unwrap(), fs::read(&four).unwrap());
    let summary = fs::read_to_string(dir.path().join("one.summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    let models = fs::read_to_string(dir.path().join("one.models.csv")).unwrap();
    assert_eq!(models.lines().count(), 1 + 2 * 2 * 4);

    let grid = path(dir.path(), "grid.json");
    fs::write(
        &grid,
        r#"{"design":"bivar_grid","kappa":0.9,"target_gc":0.001,"a_values":[-0.5,0.0,0.5],
            "n_list":[2000],"trials_per_model":5,"alpha":0.05,"tests":["projection"],"order_policy":{"fixed":1}}"#,
    )
    .unwrap();
    let csv = ok(&["experiment", &grid, "--format", "csv"]);
    assert!(csv.contains("type_ii"));
    let rep = json(&["experiment", &grid]);
    assert_eq!(rep["cells"][0]["per_model"].as_array().unwrap().len(), 9);
}

#[test]
fn oracle_agrees_with_pipeline() {
    let r = json(&["oracle", "--a-xx", "0.4", "--a-yy", "-0.3", "--a-xy", "0.2", "--sigma-xy", "0.3", "--omega", "1.1", "--band", "0.2", "2.5"]);
    for k in ["gc_time", "gc_spectral", "gc_band"] {
        assert!(r[k]["diff"].as_f64().unwrap() < 1e-8, "{k}");
    }
    let r = json(&["oracle", "--a-xx", "0.4", "--a-yx", "0.5", "--a-yy", "0.6", "--band", "0", "1.5707963267948966"]);
    assert!(r["null_lambda"]["diff"].as_f64().unwrap() < 1e-10);
    assert!(r["null_lambda_band"]["diff"].as_f64().unwrap() < 1e-8);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| srgc(args).status.code().unwrap();
    assert_eq!(code(&["model", "random", "--nx", "1"]), 1);
    assert_eq!(code(&["model", "info", "/nonexistent/model.json"]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["model", "info", "x.json", "--bogus"]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(
        code(&["model", "random", "--nx", "1", "--ny", "1", "-p", "1", "--rho", "0.9", "--gamma", "1", "--gc", "50"]),
        2
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, r#"{"n":2,"p":1,"A":[[1.2,0],[0,0]],"Sigma":[[1,0],[0,1]],"partition":{"nx":1,"ny":1}}"#).unwrap();
    let out = srgc(&["model", "info", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectral radius"));
    let nonnull = path(dir.path(), "nn.json");
    fs::write(&nonnull, r#"{"n":2,"p":1,"A":[[0.1,0.5],[0,0.2]],"Sigma":[[1,0],[0,1]],"partition":{"nx":1,"ny":1}}"#).unwrap();
    assert_eq!(code(&["nulldist", &nonnull]), 1);
}
