use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn ifc(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ifc"));
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("IFC_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("spawn ifc");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const DIAGONAL: &str = r#"{"schema_version":1,"K":2,"H":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#;
const SYMMETRIC: &str = r#"{"schema_version":1,"K":2,"H":[[[1,0],[0.5,0]],[[0.5,0],[1,0]]]}"#;

#[test]
fn count_bounds_prints_each_k() {
    let out = ifc(&["count-bounds", "2", "3", "5"], "", &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "N(2)=4\nN(3)=15\nN(5)=325\n");
}

#[test]
fn evaluate_diagonal_channel() {
    let out = ifc(&["evaluate", "-"], DIAGONAL, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert!((doc["sum_rate_upper"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    let subsets: std::collections::BTreeSet<String> = doc["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["subset"].to_string())
        .collect();
    assert_eq!(subsets.len(), 3);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = ifc(&["evaluate", "-", "--seed", "5"], SYMMETRIC, &[]);
    let b = ifc(&["evaluate", "-", "--seed", "5"], SYMMETRIC, &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn environment_overrides_and_flag_precedence() {
    let from_env = json(&ifc(&["evaluate", "-"], DIAGONAL, &[("IFC_SEED", "9"), ("IFC_RESTARTS", "3")]));
    assert_eq!(from_env["config"]["seed"], 9);
    assert_eq!(from_env["config"]["restarts"], 3);
    let flag = json(&ifc(&["evaluate", "-", "--seed", "4"], DIAGONAL, &[("IFC_SEED", "9")]));
    assert_eq!(flag["config"]["seed"], 4);
}

#[test]
fn parse_failures_exit_two_on_stderr() {
    let out = ifc(&["evaluate", "-"], "{not json", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let out = ifc(&["evaluate", "-"], r#"{"schema_version":1,"H":[[[1,0]]]}"#, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/K"));
}

#[test]
fn oversized_region_exits_three() {
    let h: Vec<Vec<[f64; 2]>> = (0..7).map(|i| (0..7).map(|j| [if i == j { 1.0 } else { 0.0 }, 0.0]).collect()).collect();
    let spec = serde_json::json!({"schema_version": 1, "K": 7, "H": h}).to_string();
    let out = ifc(&["evaluate", "-"], &spec, &[]);
    assert_eq!(out.status.code(), Some(3));
    let out = ifc(&["evaluate", "-", "--sum-rate-only", "--families", "etw"], &spec, &[]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn construct_then_certify() {
    let out = ifc(&["construct", "rank-one", "-"], r#"{"a":[[1,0],[2,0]],"b":[[1,0],[1,0]]}"#, &[]);
    assert_eq!(out.status.code(), Some(0));
    let spec = json(&out);
    assert_eq!(spec["H"], serde_json::json!([[[1.0, 0.0], [1.0, 0.0]], [[2.0, 0.0], [2.0, 0.0]]]));
    let cert = ifc(&["certify", "-"], &spec.to_string(), &[]);
    assert_eq!(cert.status.code(), Some(0));
    assert_eq!(json(&cert)["path"], "DEGRADED");

    let z = ifc(
        &["construct", "z", "-"],
        r#"{"Sigma":[[[1,0],[0.3,0]],[[0.3,0],[1,0]]],"diag_gains":[1.5,2.0]}"#,
        &[],
    );
    let spec = json(&z);
    let cert = ifc(&["certify", "-"], &spec.to_string(), &[]);
    assert_eq!(cert.status.code(), Some(0));
    assert_eq!(json(&cert)["path"], "Z_THEOREM2");
    let eval = json(&ifc(&["evaluate", "-"], &spec.to_string(), &[]));
    let h01 = spec["H"][0][1][0].as_f64().unwrap();
    let succ = (1.0 + 2.25 / (1.0 + h01 * h01)).log2() + (1.0f64 + 4.0).log2();
    assert!((eval["sum_rate_upper"].as_f64().unwrap() - succ).abs() < 1e-9);

    let bad = ifc(&["construct", "z", "-"], r#"{"Sigma":[[[1,0],[2,0]],[[2,0],[1,0]]]}"#, &[]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn certify_weak_symmetric_channel_is_bound_only() {
    let out = ifc(&["certify", "-"], SYMMETRIC, &[]);
    assert_eq!(out.status.code(), Some(1));
    let cert = json(&out);
    assert_eq!(cert["status"], "BOUND_ONLY");
    assert!(cert["gap"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_emits_one_row_per_step() {
    let template = r#"{"schema_version":1,"K":2,"H":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#;
    let out = ifc(
        &["sweep", "-", "--param", "/H/0/1", "--param", "/H/1/0", "--from", "0", "--to", "2", "--steps", "21"],
        template,
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "parameter,upper_kra,upper_etw,tin_lower,gap");
    assert_eq!(lines.len(), 22);
    let first: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[4], 0.0);
    let zero = ifc(&["sweep", "-", "--param", "/H/0/1", "--from", "0", "--to", "1", "--steps", "0"], template, &[]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn verify_reports_agreement() {
    let out = ifc(&["verify", "-", "--samples", "20000", "--resolution", "40"], SYMMETRIC, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json(&out);
    assert_eq!(doc["agree"], true);
    assert_eq!(doc["grid"].as_array().unwrap().len(), 2);
}
