use std::process::{Command, Output};

use foliation_core::cli_reports::validate_envelope;
use serde_json::Value;

fn foliate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foliate")).args(args).env("FOLIATE_THREADS", "1").output().unwrap()
}

fn report(args: &[&str]) -> (i32, Value) {
    let out = foliate(args);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    validate_envelope(&v).unwrap();
    (out.status.code().unwrap(), v)
}

#[test]
fn zoo_lists_every_entry() {
    let out = foliate(&["zoo"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    let out = foliate(&["zoo", "--filter", "sitter", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn gf_reports_de_sitter_saturation() {
    let (code, v) = report(&["gf", "--spacetime", "de_sitter", "--count", "64"]);
    assert_eq!(code, 0);
    assert!((v["result"]["gf"].as_f64().unwrap() + 1.0).abs() < 1e-9);
    assert!((v["result"]["supH2"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["config"]["sampler"]["count"], 64);
}

#[test]
fn bound_violations_exit_two() {
    let (code, v) = report(&["gf", "--spacetime", "anti_de_sitter_chart"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "bound_violated");
}

#[test]
fn riccati_csv_and_json() {
    let (code, v) = report(&["riccati", "--kappa", "1", "--h0", "0", "--s-max", "2"]);
    assert_eq!(code, 0);
    assert!((v["result"]["blow_up"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    let out = foliate(&["riccati", "--kappa", "-1", "--h0", "0", "--s-max", "1", "--format", "csv"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("s,h\n"));
    let last: f64 = csv.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((last - 1f64.tanh()).abs() < 1e-8);
}

#[test]
fn umbilicity_reports_the_failed_precondition_as_data() {
    let (code, v) = report(&["umbilicity", "--spacetime", "slab", "--leaves", "0.5,2"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["propagation"]["precondition"], "not_constant_curvature");
    assert_eq!(v["result"]["leaves"][0]["umbilic"], true);
    assert_eq!(v["result"]["leaves"][1]["umbilic"], false);
}

#[test]
fn integrate_leaf_flags_the_symmetric_leaf() {
    let (code, v) = report(&["integrate-leaf", "--spacetime", "robertson_walker", "--leaves", "0,0.5", "--nodes", "8"]);
    assert_eq!(code, 0);
    let leaves = v["result"]["obstruction"]["leaves"].as_array().unwrap();
    assert_eq!(leaves[0]["obstructed"], true);
    assert_eq!(leaves[1]["obstructed"], false);
    let (code, _) = report(&["integrate-leaf", "--spacetime", "minkowski_hyperboloids"]);
    assert_eq!(code, 1);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("report.json");
    std::fs::write(&cfg, "[spacetime]\nname = \"de_sitter_flat_slicing\"\nc = 4.0\n\n[sampler]\nkind = \"grid\"\nlevel = 1\n").unwrap();
    let status = foliate(&["gf", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]).status;
    assert_eq!(status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["result"]["supH2"].as_f64().unwrap() - 4.0).abs() < 1e-8);
    let (_, v) = report(&["gf", "--config", cfg.to_str().unwrap(), "--param", "c=9.0"]);
    assert!((v["result"]["supH2"].as_f64().unwrap() - 9.0).abs() < 1e-8);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(foliate(&["gf", "--spacetime", "nowhere"]).status.code(), Some(1));
    assert_eq!(foliate(&["gf", "--param", "novalue"]).status.code(), Some(1));
    assert_eq!(foliate(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(foliate(&["gf", "--config", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(foliate(&["--help"]).status.code(), Some(0));
}

#[test]
fn audit_tolerance_failure_carries_diagnostics() {
    let (code, v) = report(&["audit", "--spacetime", "minkowski_tilted", "--tolerance", "1e-15"]);
    assert_eq!(code, 2);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["error"]["kind"], "no_unique_signature");
    assert_eq!(v["result"]["calibration"]["residuals"].as_array().unwrap().len(), 8);
}
