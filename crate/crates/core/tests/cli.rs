use std::path::Path;
use std::process::{Command, Output};

use strata_audit::io::ingest_pool;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strata-audit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path, size: usize, prevalence: f64, seed: u64) -> String {
    let path = dir.join(format!("pool-{size}-{seed}.jsonl"));
    let p = path.to_str().unwrap().to_string();
    stdout(&[
        "--seed",
        &seed.to_string(),
        "generate",
        "--size",
        &size.to_string(),
        "--prevalence",
        &prevalence.to_string(),
        "-o",
        &p,
    ]);
    p
}

#[test]
fn plan_prints_the_sample_size() {
    assert_eq!(stdout(&["plan", "--p", "0.059", "--rel", "0.20"]), "1532\n");
    assert_eq!(stdout(&["plan", "--p", "0.041", "--rel", "0.2"]), "2247\n");
}

#[test]
fn plan_grid_lists_every_cell() {
    let grid = stdout(&["plan", "--grid"]);
    for n in ["865", "3458", "13830", "1532", "6127", "24508", "9508", "38031", "152122", "95941", "383762", "1535047"] {
        assert!(grid.split_whitespace().any(|t| t == n), "{n} missing from\n{grid}");
    }
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| run(args).status.code().unwrap();
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["plan", "--p", "abc"]), 1);
    assert_eq!(code(&["plan", "--p", "1.5"]), 2);
    assert_eq!(code(&["estimate", "--pool", "/nonexistent/pool.jsonl"]), 4);
    assert_eq!(code(&["--help"]), 0);

    let usage = run(&[]);
    assert!(String::from_utf8_lossy(&usage.stderr).contains("Usage"));
}

#[test]
fn malformed_pool_line_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    std::fs::write(&path, "{\"id\":\"a\",\"score\":0.2}\n{\"id\":\"b\",\"score\":1.5}\n").unwrap();
    let out = run(&["bin", "--pool", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn pilot_estimate_report() {
    let dir = tempfile::tempdir().unwrap();
    let pool = generate(dir.path(), 20_000, 0.05, 3);
    let text = stdout(&[
        "--seed", "4", "estimate", "--pool", &pool, "--method", "stratified", "--bins", "quantile:8", "--alloc",
        "pilot:50",
    ]);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let est = &report["estimates"][0];
    assert_eq!(est["method"], "stratified-pilot");
    let rows = report["strata"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let sum = |key: &str| rows.iter().map(|r| r[key].as_u64().unwrap()).sum::<u64>();
    assert_eq!(sum("population"), 20_000);
    assert_eq!(sum("annotated"), est["n_total"].as_u64().unwrap());
    assert_eq!(sum("annotated"), report["strata"]["total_annotated"].as_u64().unwrap());
    assert_eq!(sum("positives"), report["strata"]["total_positives"].as_u64().unwrap());
    assert!(rows.iter().all(|r| r["annotated"].as_u64().unwrap() >= 50));
    let point = est["point"].as_f64().unwrap();
    assert!(est["ci_low"].as_f64().unwrap() <= point && point <= est["ci_high"].as_f64().unwrap());
}

#[test]
fn generated_pool_ingests_line_for_line() {
    let dir = tempfile::tempdir().unwrap();
    let pool = generate(dir.path(), 100_000, 0.041, 9);
    let lines = std::fs::read_to_string(&pool).unwrap().lines().count();
    assert_eq!(lines, 100_000);
    let (items, summary) = ingest_pool(Path::new(&pool)).unwrap();
    assert_eq!(items.len(), lines);
    assert_eq!(summary.total, 100_000);
    assert_eq!(summary.labeled, 100_000);
}

#[test]
fn recall_from_counts_and_prevalence() {
    let text = stdout(&[
        "recall", "--tp", "33000", "--negatives", "1634000", "--prevalence", "0.041", "--prevalence-ci", "0.0328",
        "0.0492",
    ]);
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let recall = &report["recall"];
    let ci = recall["recall_ci"].as_array().unwrap();
    assert!((ci[0].as_f64().unwrap() - 0.291024).abs() < 1e-6);
    assert!((ci[1].as_f64().unwrap() - 0.381083).abs() < 1e-6);
}

#[test]
fn inconsistent_report_counts_rejected() {
    let out = run(&["report", "--tp", "10", "--fp", "5", "--tn", "80", "--fn", "5", "--total", "99"]);
    assert_eq!(out.status.code(), Some(2));
}
