use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispbound")).args(args).output().expect("binary runs")
}

fn run_with_cache(args: &[&str], cache: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispbound"))
        .args(args)
        .env("DISPBOUND_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn json_without_timestamp(out: &Output) -> Value {
    let mut v: Value = serde_json::from_slice(&out.stdout).expect("JSON on stdout");
    v["meta"].as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn verify_reports_the_closed_form() {
    let out = run(&["verify", "--n", "2", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("alpha=33, x*=uniform, gap<1e-6"), "{stderr}");
    let v = json_without_timestamp(&out);
    assert_eq!(v["result"]["passed"], true);
    assert_eq!(v["meta"]["subcommand"], "verify");
    assert_eq!(v["meta"]["seed"], 42);
    assert_eq!(v["meta"]["config"]["k"], 2);
}

#[test]
fn relations_match_reference_tables() {
    let out = run(&["relations", "--n", "2", "--k", "2", "--format", "json", "--paper-check"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_without_timestamp(&out);
    assert_eq!(v["result"]["relations"].as_array().unwrap().len(), 48);
    assert_eq!(v["result"]["reference_diff"]["missing"].as_array().unwrap().len(), 0);
    assert_eq!(v["result"]["reference_diff"]["unexpected"].as_array().unwrap().len(), 0);
}

#[test]
fn conjecture_is_supported_for_rank_three() {
    let out = run(&["conjecture", "--n", "3", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_without_timestamp(&out);
    assert_eq!(v["result"]["status"], "conjecture-supported");
    let alpha = v["result"]["alpha_star"].as_f64().unwrap();
    assert!((alpha - 145.0).abs() / 145.0 < 1e-6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("conjecture-supported"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["verify", "--n", "1"]).status.code(), Some(2));
    assert_eq!(run(&["nonexistent"]).status.code(), Some(2));
    assert_eq!(run(&["relations", "--n", "3", "--k", "2", "--paper-check"]).status.code(), Some(2));
    assert_eq!(run(&["hyperbolic-test", "--radius-factor", "0"]).status.code(), Some(2));
    assert_eq!(run(&["minimize", "--tol", "0"]).status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_one() {
    let out = run(&["verify", "--k", "3", "--max-iter", "1", "--restarts", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("FAIL"));
}

#[test]
fn identical_runs_give_identical_json() {
    for args in [
        &["minimize", "--n", "2", "--k", "3", "--seed", "5"][..],
        &["hyperbolic-test", "--k", "2", "--trials", "20", "--seed", "7"][..],
        &["conjecture", "--n", "3", "--k", "2", "--seed", "9"][..],
    ] {
        let a = json_without_timestamp(&run(args));
        let b = json_without_timestamp(&run(args));
        assert_eq!(a, b, "{args:?}");
    }
    let one = json_without_timestamp(&run(&["minimize", "--k", "3", "--threads", "1"]));
    let many = json_without_timestamp(&run(&["minimize", "--k", "3", "--threads", "4"]));
    assert_eq!(one["result"], many["result"]);
}

#[test]
fn hyperbolic_test_emits_margins() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("margins.csv");
    let out = run(&["hyperbolic-test", "--k", "2", "--trials", "10", "--seed", "7", "--emit", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,z0,D,bound,margin,argmax_word"));
    assert_eq!(lines.count(), 100);
}

#[test]
fn csv_output_has_comment_header() {
    let out = run(&["relations", "--n", "2", "--k", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("# version"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "gamma,s,j,S");
    assert_eq!(rows.len(), 49);
}

#[test]
fn census_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_with_cache(&["family", "--n", "2", "--k", "3"], dir.path());
    assert_eq!(first.status.code(), Some(0));
    let cached = dir.path().join("census-n2-k3.json");
    assert!(cached.exists());
    let second = run_with_cache(&["family", "--n", "2", "--k", "3"], dir.path());
    assert_eq!(json_without_timestamp(&first), json_without_timestamp(&second));
    let v = json_without_timestamp(&second);
    assert_eq!(v["result"]["count"], 252);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conv.json");
    let out = run(&["convexity", "--samples", "500", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["passed"], true);
}
