use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sqlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlab")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_report(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let path_s = path.to_str().unwrap().to_string();
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", &path_s]);
    let out = sqlab(&full);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    path_s
}

#[test]
fn dims_line_report() {
    let v = json(&sqlab(&["dims", "--gen", "line", "--p", "5", "--tau", "0.2", "--kappa", "k1"]));
    assert_eq!(v["report"], "dims");
    assert_eq!(v["kind"], "rsd");
    assert_eq!(v["kappa"], "k1");
    assert!(v["value"].as_f64().unwrap() >= 1.0);
}

#[test]
fn audit_line_report() {
    let v = json(&sqlab(&["audit", "--gen", "line", "--p", "5"]));
    assert!((v["same_pair"]["max"].as_f64().unwrap() - 3.0).abs() < 1e-10);
    assert!((v["parallel"]["max"].as_f64().unwrap() - 0.7).abs() < 1e-10);
    assert!((v["non_parallel"]["max"].as_f64().unwrap() - 0.04).abs() < 1e-10);
    assert!(v["rho"].as_f64().unwrap() <= 0.4);
    assert_eq!(v["passed"], true);
}

#[test]
fn solve_biclique_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.json");
    let status = sqlab(&[
        "solve", "--gen", "biclique", "--n", "8", "--k", "2", "--tau", "0.2", "--trials", "200", "--seed", "7", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "stderr: {}", String::from_utf8_lossy(&status.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["trials"], 200);
    assert!(v["success_rate"].as_f64().unwrap() >= 0.9);
    assert_eq!(v["violations"], 0);
    let csv = std::fs::read_to_string(out.with_extension("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn same_seed_gives_identical_reports() {
    let args = ["solve", "--gen", "line", "--p", "5", "--tau", "0.2", "--trials", "20", "--seed", "3"];
    let a = sqlab(&args);
    let b = sqlab(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn merge_single_and_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let line = write_report(dir.path(), "line.json", &["dims", "--gen", "line", "--p", "3", "--tau", "0.2"]);
    let spike = write_report(dir.path(), "spike.json", &["dims", "--gen", "spike", "--k", "3", "--tau", "0.6"]);

    let one = sqlab(&["merge", &line]);
    assert!(one.status.success());
    let text = String::from_utf8(one.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), "instance,kind,kappa,tau,value,exactness");

    let two = sqlab(&["merge", &spike, &line]);
    assert!(two.status.success());
    let text = String::from_utf8(two.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    let names: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    assert_eq!(names, sorted);
    assert!(rows.iter().any(|r| r.starts_with("spike-k3,") && r.contains(",3,")));
}

#[test]
fn merge_empty_list_is_header_only() {
    let out = sqlab(&["merge"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "instance,kind,kappa,tau,value,exactness\n");
}

#[test]
fn merge_mixed_kinds_fails() {
    let dir = tempfile::tempdir().unwrap();
    let dims = write_report(dir.path(), "d.json", &["dims", "--gen", "line", "--p", "3", "--tau", "0.2"]);
    let audit = write_report(dir.path(), "a.json", &["audit", "--gen", "line", "--p", "3"]);
    assert_eq!(sqlab(&["merge", &dims, &audit]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    let cases: [&[&str]; 5] = [
        &["solve", "--gen", "biclique", "--n", "8", "--k", "2", "--tau", "0.2", "--trials", "5"],
        &["dims", "--gen", "biclique", "--n", "8", "--k", "2", "--tau", "0.2", "--param", "dim=sd"],
        &["dims", "--gen", "line", "--p", "5"],
        &["dims", "--tau", "0.2"],
        &["dims", "--gen", "line", "--p", "5", "--tau", "-1"],
    ];
    for args in cases {
        let out = sqlab(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"gen": "spike", "tau": 0.6, "param": {"k": 4}}"#).unwrap();
    let v = json(&sqlab(&["dims", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["instance"], "spike-k4");
    assert!((v["value"].as_f64().unwrap() - 4.0).abs() < 1e-9);
}
