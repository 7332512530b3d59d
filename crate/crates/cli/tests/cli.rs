use std::fs;
use std::process::{Command, Output};

fn sconflict(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sconflict"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn simulate_prints_the_trajectory() {
    let o = sconflict(&["simulate", "--scenario", "two-cell", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("step,theta,W,z,residual,mu_1,mu_2,nu_1,nu_2")
    );
    assert_eq!(lines.next(), Some("0,0.5,0.7,0.8,,0.5,0.5,0.2,0.8"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("1,0.359375,0.4375,0.921875,0.1875,0.6875,"));
}

#[test]
fn json_report_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sconflict(&["limit", "--scenario", "spectral-gap-n3", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let d = json["levels"][0]["variation_distance"].as_f64().unwrap();
    assert!((d - 1.0 / 3.0).abs() < 1e-12);
    assert!(dir.path().join("limits.csv").exists());
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(
        &path,
        "name = \"flags\"\nlevel = 1\n[scheme]\nn = 3\n[dynamics]\ntol = 0.5\nmax_iter = 7\n",
    )
    .unwrap();
    let config = path.to_str().unwrap();
    let o = sconflict(&[
        "simulate",
        "--config",
        config,
        "--tol",
        "1e-12",
        "--max-iter",
        "3",
    ]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["scenario"]["dynamics"]["max_iter"], 3);
    assert_eq!(json["scenario"]["dynamics"]["tol"], 1e-12);
    assert_eq!(json["trajectory"]["iterations"], 3);

    // same seed, same random matrices
    let a = sconflict(&[
        "limit", "--config", config, "--seed", "9", "--format", "csv",
    ]);
    let b = sconflict(&[
        "limit", "--config", config, "--seed", "9", "--format", "csv",
    ]);
    let c = sconflict(&[
        "limit", "--config", config, "--seed", "10", "--format", "csv",
    ]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sweep_and_control() {
    let o = sconflict(&[
        "sweep",
        "--scenario",
        "directed-priority",
        "--from",
        "1",
        "--to",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 4);

    let o = sconflict(&["control", "--scenario", "reversal-two-index"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["control"]["reversal"]["cell"]["depth"], 3);
    assert_eq!(json["control"]["reversal"]["cell"]["m"], 2);
}

#[test]
fn emit_distribution_csv() {
    let o = sconflict(&[
        "emit-distribution",
        "--scenario",
        "two-cell",
        "--measure",
        "nu",
        "--samples",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "x,F\n0,0\n0.5,0.2\n1,1\n");
}

#[test]
fn verify_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = sconflict(&[
        "verify",
        "spectral-gap",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["failed"], 0);
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(sconflict(&["verify", "nonsense"]).status.code(), Some(1));
    assert_eq!(sconflict(&["simulate"]).status.code(), Some(1));
    assert_eq!(
        sconflict(&["simulate", "--scenario", "two-cell", "--tol", "0"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sconflict(&["frobnicate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "name = \"bad\"\n[scheme]\nn = 3\n[mu]\nkind = \"self-similar\"\nrows = [[0.5, 0.6, 0.1]]\n").unwrap();
    let o = sconflict(&["limit", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn failed_checks_exit_two() {
    // the iterate cannot meet the closed form after one step
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.toml");
    fs::write(
        &path,
        "name = \"short\"\nlevel = 1\n[scheme]\nn = 2\n[mu]\nkind = \"self-similar\"\nrows = [[0.5, 0.5]]\n\
         [nu]\nkind = \"self-similar\"\nrows = [[0.2, 0.8]]\n",
    )
    .unwrap();
    let o = sconflict(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--max-iter",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
