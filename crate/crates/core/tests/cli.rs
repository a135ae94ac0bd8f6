use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bjl(dir: &Path, args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bjl"));
    cmd.args(args).current_dir(dir).env_remove("BJL_SEED");
    if let Some(s) = seed_env {
        cmd.env("BJL_SEED", s);
    }
    cmd.output().expect("bjl runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Rows of a density table as `(point, value, tail_bound)`.
fn density_rows(path: &Path) -> Vec<(Vec<f64>, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            let n = f.len();
            (f[..n - 3].to_vec(), f[n - 3], f[n - 1])
        })
        .collect()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let usage = bjl(d, &["simulate", "--beta", "0", "--p", "3", "--q", "3", "--out", "a.csv"], None);
    assert_eq!(code(&usage), 2);
    let unsupported = bjl(d, &["density", "--mode", "km2", "--beta", "1", "--p", "3", "--q", "3", "--m", "2"], None);
    assert_eq!(code(&unsupported), 2);
    assert!(String::from_utf8_lossy(&unsupported.stderr).contains("beta = 2"));
    assert_eq!(code(&bjl(d, &["simulate", "--no-such-flag"], None)), 2);

    let verdict = bjl(d, &["verify", "--suite", "hitting", "--paths", "20", "--horizon", "0.05", "--dt", "1e-3", "--out", "v.json"], None);
    assert_eq!(code(&verdict), 1);
    let report: Value = serde_json::from_slice(&std::fs::read(d.join("v.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);

    let numeric = bjl(
        d,
        &["simulate", "--beta", "1", "--p", "1.05", "--q", "4", "--m", "1", "--start", "0.02", "--dt", "1e-2",
          "--max-halvings", "0", "--horizon", "5", "--out", "n.csv"],
        None,
    );
    assert_eq!(code(&numeric), 3);

    let ok = bjl(d, &["verify", "--suite", "identities", "--out", "i.json"], None);
    assert_eq!(code(&ok), 0);
}

#[test]
fn alcove_brownian_motion_expands_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = bjl(d, &["simulate", "--alcove-bm", "--m", "3", "--horizon", "0.01", "--dt", "1e-3", "--seed", "1", "--out", "p.csv"], None);
    assert_eq!(code(&o), 0);
    let run = &manifest(d)["run"];
    assert_eq!(run["beta"], 2.0);
    assert_eq!(run["p"], 4.5);
    assert_eq!(run["q"], 3.5);
    let header = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert!(header.starts_with("t,phi_1,phi_2,phi_3,event\n"));
}

#[test]
fn univariate_table_integrates_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = bjl(d, &["density", "--mode", "univariate", "--r", "0.5", "--s", "1.5", "--theta", "0.4", "--t", "0.3", "--grid", "400", "--out", "u.csv"], None);
    assert_eq!(code(&o), 0);
    let rows = density_rows(&d.join("u.csv"));
    assert_eq!(rows.len(), 400);
    let mass: f64 = rows.iter().map(|r| r.1).sum::<f64>() / 400.0;
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
}

#[test]
fn km2_with_one_particle_is_the_univariate_density() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let common = ["--r", "0.5", "--s", "0.5", "--theta", "0.3", "--grid", "7"];
    let a = bjl(d, &[&["density", "--mode", "km2", "--m", "1", "--out", "k.csv"][..], &common].concat(), None);
    let b = bjl(d, &[&["density", "--mode", "univariate", "--out", "u.csv"][..], &common].concat(), None);
    assert_eq!((code(&a), code(&b)), (0, 0));
    let (k, u) = (density_rows(&d.join("k.csv")), density_rows(&d.join("u.csv")));
    assert_eq!(k.len(), u.len());
    for (x, y) in k.iter().zip(&u) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() <= 1e-13 * y.1, "{} vs {}", x.1, y.1);
        assert!((x.2 - y.2).abs() <= 1e-10 * y.2, "tail {} vs {}", x.2, y.2);
    }
}

#[test]
fn partition_expansion_reports_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = bjl(d, &["density", "--mode", "partition2", "--t", "0.5", "--grid", "8", "--out", "pt.csv"], None);
    assert_eq!(code(&o), 0);
    let meta = &manifest(d)["metadata"];
    assert_eq!(meta["km2_agreement"], true);
    assert!(meta["km2_max_relative_difference"].as_f64().unwrap() <= 1e-8);
    assert_eq!(density_rows(&d.join("pt.csv")).len(), 8 * 7 / 2);
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let base = ["simulate", "--beta", "2", "--p", "3", "--q", "3", "--horizon", "0.05", "--dt", "1e-3"];
    let env = bjl(d, &[&base[..], &["--out", "env.csv"]].concat(), Some("7"));
    assert_eq!(code(&env), 0);
    assert_eq!(manifest(d)["seed"], 7);
    let flag = bjl(d, &[&base[..], &["--seed", "7", "--out", "flag.csv"]].concat(), None);
    assert_eq!(code(&flag), 0);
    assert_eq!(std::fs::read(d.join("env.csv")).unwrap(), std::fs::read(d.join("flag.csv")).unwrap());
    let both = bjl(d, &[&base[..], &["--seed", "3", "--out", "both.csv"]].concat(), Some("7"));
    assert_eq!(code(&both), 0);
    assert_eq!(manifest(d)["seed"], 3);
    assert_ne!(std::fs::read(d.join("both.csv")).unwrap(), std::fs::read(d.join("flag.csv")).unwrap());
}

#[test]
fn config_file_values_yield_to_flags_and_inputs_stay_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let config = "# run options\nbeta = 2\np = 3.5\nq = 2.5\nhorizon = 0.1\ndt = 1e-3\nseed = 4\n";
    std::fs::write(d.join("run.conf"), config).unwrap();
    let o = bjl(d, &["--config", "run.conf", "simulate", "--horizon", "0.05", "--out", "out/c.csv"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: Value = serde_json::from_slice(&std::fs::read(d.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["run"]["horizon"], 0.05);
    assert_eq!(m["run"]["beta"], 2.0);
    assert_eq!(m["seed"], 4);
    assert_eq!(std::fs::read_to_string(d.join("run.conf")).unwrap(), config);

    let before = std::fs::read(d.join("out/manifest.json")).unwrap();
    let r = bjl(d, &["replay", "out/manifest.json", "--out", "again/c.csv"], None);
    assert_eq!(code(&r), 0);
    assert_eq!(std::fs::read(d.join("out/manifest.json")).unwrap(), before);
    assert_eq!(std::fs::read(d.join("again/c.csv")).unwrap(), std::fs::read(d.join("out/c.csv")).unwrap());
}
