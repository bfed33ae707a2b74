use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use invpress::config::parse_config;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invpress"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SCALAR: &str = r#"
[system]
kind = "linear"
A = [[1.0]]
B = [[1.0]]

[control]
range.lo = [-1.0]
range.hi = [1.0]

[sets]
K = { kind = "box", lo = [-0.5], hi = [0.5] }
Q = { kind = "box", lo = [-1.0], hi = [1.0] }

[discretization]
delta = 0.5
tau0 = 0.5
n_max = 4
pitch = 0.05
lower_tau = 1.0
"#;

fn without_timestamp(json: &str) -> String {
    json.lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn example_configs_round_trip() {
    for name in ["spiral.toml", "scalar.toml", "vanderpol.toml"] {
        let cfg = parse_config(&std::fs::read_to_string(example(name)).unwrap()).unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn misspelled_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SCALAR.replace("pitch", "pich"));
    let out = run(&["estimate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("discretization.pich") && err.contains("pitch"),
        "{err}"
    );
}

#[test]
fn delta_not_multiple_of_dt_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        &SCALAR.replace("delta = 0.5", "delta = 0.505\ndt = 0.01"),
    );
    let out = run(&["estimate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("delta") && err.contains("dt"), "{err}");
}

#[test]
fn estimate_is_reproducible_and_writes_the_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scalar.toml", SCALAR);
    let csv = dir.path().join("series.csv");
    let first = run(&["estimate", &cfg, "--csv", csv.to_str().unwrap()]);
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = run(&["estimate", &cfg]);
    let (a, b) = (
        String::from_utf8(first.stdout).unwrap(),
        String::from_utf8(second.stdout).unwrap(),
    );
    assert_eq!(without_timestamp(&a), without_timestamp(&b));
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "estimate");
    assert_eq!(v["result"]["series"].as_array().unwrap().len(), 4);
    let table = std::fs::read_to_string(csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next(),
        Some("n,tau,cover_size,a_tau,log_a_over_tau,slope_so_far")
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn seed_override_changes_only_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scalar.toml", SCALAR);
    let out = run(&["formula", &cfg, "--seed", "7"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["discretization"]["seed"], 7);
    assert_eq!(v["config"]["controlset"]["seed"], 7);
    assert_eq!(v["result"]["value"], 1.0);
}

#[test]
fn uncovered_grid_point_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SCALAR
        .replace(
            r#"K = { kind = "box", lo = [-0.5], hi = [0.5] }"#,
            r#"K = { kind = "box", lo = [-1.0], hi = [1.0] }"#,
        )
        .replace(
            r#"Q = { kind = "box", lo = [-1.0], hi = [1.0] }"#,
            r#"Q = { kind = "box", lo = [-0.9], hi = [0.9] }"#,
        );
    let cfg = write(dir.path(), "inadmissible.toml", &text);
    let out = run(&["estimate", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn non_hyperbolic_formula_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let text = SCALAR
        .replace(
            "A = [[1.0]]\nB = [[1.0]]",
            "A = [[0.0, 1.0], [-1.0, 0.0]]\nB = [[0.0], [1.0]]",
        )
        .replace(
            r#"lo = [-0.5], hi = [0.5]"#,
            r#"lo = [-0.5, -0.5], hi = [0.5, 0.5]"#,
        )
        .replace(
            r#"lo = [-1.0], hi = [1.0] }"#,
            r#"lo = [-1.0, -1.0], hi = [1.0, 1.0] }"#,
        );
    let cfg = write(dir.path(), "center.toml", &text);
    let out = run(&["formula", &cfg]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn lyapunov_reports_the_equilibrium_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let control = write(dir.path(), "zero.csv", "delta,1.0\n0.0\n");
    let csv = dir.path().join("rho.csv");
    let out = run(&[
        "lyapunov",
        example("spiral.toml").to_str().unwrap(),
        "--T",
        "1",
        "--control",
        &control,
        "--x0",
        "0,0",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let e = &v["result"]["exponents"];
    assert_eq!(e.as_array().unwrap().len(), 1);
    assert!((e[0]["rho"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(e[0]["multiplicity"], 2);
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("rho,multiplicity\n"));
}

#[test]
fn controlset_writes_hull_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hull.csv");
    let json = dir.path().join("hull.json");
    let out = run(&[
        "controlset",
        example("spiral.toml").to_str().unwrap(),
        "--samples",
        "300",
        "--out",
        json.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["result"]["samples"], 300);
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("x1,x2\n"));
    assert_eq!(
        table.lines().count() - 1,
        v["result"]["vertices"].as_array().unwrap().len()
    );
}

#[test]
fn bounds_reports_all_three_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scalar.toml", SCALAR);
    let out = run(&["bounds", &cfg]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["formula"], 1.0);
    let lower = v["result"]["lower_bound"]["value"].as_f64().unwrap();
    let upper = v["result"]["upper_bound"]["value"].as_f64().unwrap();
    assert!(
        lower <= 1.0 + 1e-9 && upper >= 1.0 - 1e-9,
        "{lower} {upper}"
    );
}
