use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn quadvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadvar"))
        .args(args)
        .env_remove("QUADVAR_WORKERS")
        .output()
        .expect("run quadvar")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quadvar-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn exit_codes() {
    assert_eq!(quadvar(&["--help"]).status.code(), Some(0));
    assert_eq!(quadvar(&["--version"]).status.code(), Some(0));
    assert_eq!(quadvar(&["cumulants", "--bogus"]).status.code(), Some(64));
    assert_eq!(quadvar(&[]).status.code(), Some(64));
    assert_eq!(quadvar(&["cumulants", "--H", "1.5"]).status.code(), Some(2));
    assert_eq!(quadvar(&["cumulants", "--H", "0.7", "--n-grid", "64:32:x2"]).status.code(), Some(2));
    assert_eq!(quadvar(&["simulate", "--H", "0.7", "--n", "16", "--paths", "10"]).status.code(), Some(64));
    assert_eq!(quadvar(&["rosenblatt", "--H", "0.85", "--M", "32", "--paths", "10"]).status.code(), Some(2));
    // The circulant embedding of this table has negative eigenvalues.
    let table = scratch("bad-table.txt");
    std::fs::write(&table, "1\n0.9\n-0.9\n").unwrap();
    let t = table.to_str().unwrap();
    let out = quadvar(&["simulate", "--model", "table", "--table", t, "--n", "64", "--paths", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cumulants_table_has_one_row_per_size() {
    let out = scratch("c.csv");
    let run = quadvar(&["cumulants", "--model", "fgn", "--H", "0.7", "--n-grid", "64:4096:x2", "--out", out.to_str().unwrap()]);
    assert!(run.status.success());
    assert!(run.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].starts_with("n,v_n,kappa3,kappa3_lower,kappa3_upper,kappa4"));
}

#[test]
fn rates_reports_regime_and_labels_evidence() {
    let doc = stdout_json(&quadvar(&["rates", "--H", "0.75", "--beta", "0", "--n-grid", "1024:16384:x2", "--format", "json"]));
    assert_eq!(doc["regime"], "H34Log");
    assert_eq!(doc["M_n"], "log(n)^-1.5");
    assert_eq!(doc["normal_convergence"]["label"], "finite-n evidence");
    assert!(doc["rows"].as_array().unwrap().iter().all(|r| r["ratio"].as_f64().unwrap() > 0.0));
}

#[test]
fn simulated_independent_sequence_matches_chi_square() {
    let doc = stdout_json(&quadvar(&[
        "simulate", "--model", "fgn", "--H", "0.5", "--n", "1024", "--paths", "200000", "--seed", "7",
    ]));
    assert_eq!(doc["seed"], 7);
    let k3 = doc["stats"]["kappa3"].as_f64().unwrap();
    let se = doc["stats"]["se_kappa3"].as_f64().unwrap();
    let expected = 2f64.powf(1.5) / 32.0;
    assert!((doc["exact"]["kappa3"].as_f64().unwrap() - expected).abs() < 1e-14);
    assert!((k3 - expected).abs() < 4.0 * se, "{k3} vs {expected} (se {se})");
}

#[test]
fn report_merges_and_is_deterministic() {
    let c = scratch("fit-c.json");
    let r = scratch("fit-r.json");
    let (cs, rs) = (c.to_str().unwrap(), r.to_str().unwrap());
    assert!(quadvar(&["cumulants", "--model", "fgn", "--H", "0.7", "--format", "json", "--out", cs]).status.success());
    assert!(quadvar(&["rates", "--H", "0.7", "--format", "json", "--out", rs]).status.success());
    let first = quadvar(&["report", cs, rs]);
    let second = quadvar(&["report", rs, cs]);
    assert_eq!(first.stdout, second.stdout);
    let doc = stdout_json(&first);
    let exponent = doc["cumulant_fits"][0]["kappa3_exponent"].as_f64().unwrap();
    assert!((exponent + 0.3).abs() <= 0.02, "{exponent}");
    assert_eq!(doc["regimes"][0]["regime"], "PowerLog");

    assert_eq!(quadvar(&["report"]).status.code(), Some(2));
    assert_eq!(quadvar(&["report", "/nonexistent/quadvar.json"]).status.code(), Some(2));
}

#[test]
fn worker_count_comes_from_environment() {
    let args = ["simulate", "--H", "0.6", "--n", "64", "--paths", "3000", "--seed", "9"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_quadvar"))
        .args(args)
        .env("QUADVAR_WORKERS", "3")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    assert_eq!(with_env.stdout, quadvar(&args).stdout);
}

#[test]
fn saved_paths_reproduce_statistics() {
    let paths = scratch("paths.bin");
    let p = paths.to_str().unwrap();
    let base = ["simulate", "--H", "0.7", "--n", "32", "--paths", "500", "--seed", "3"];
    let streamed = quadvar(&base);
    let mut saving = base.to_vec();
    saving.extend(["--save-paths", p]);
    let saved = quadvar(&saving);
    assert_eq!(streamed.stdout, saved.stdout);
    let bytes = std::fs::read(&paths).unwrap();
    assert!(bytes.starts_with(b"quadvar-paths v1"));
}
