//! Runs the `netmix` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use netmix::graph::ProbMatrix;

fn netmix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netmix"))
        .current_dir(dir)
        .env_remove("NETMIX_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn simulate_graph(dir: &Path) {
    let o = netmix(dir, &["simulate", "--model", "sbm6", "--n", "120", "--degree", "10", "--seed", "7", "--out", "p.csv", "--graph-out", "g.edges"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn help_lists_flags_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, flags) in [
        ("simulate", &["--model", "--n", "--degree", "--out", "--graph-out"][..]),
        ("estimate", &["--graph", "--kmax", "--holdout", "--mixer", "--reps", "--stitch", "[default: nnl]", "[default: 15]", "[default: 0.1]"][..]),
        ("benchmark", &["--mixer", "--reps", "--sweep", "--timing", "[default: 10]"][..]),
        ("linkpred", &["--frac", "--cap", "[default: 20000]"][..]),
    ] {
        let o = netmix(dir.path(), &[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8_lossy(&o.stdout);
        for f in flags.iter().chain(&["--seed", "--threads"]) {
            assert!(text.contains(f), "{sub} --help is missing {f}");
        }
    }
}

#[test]
fn simulate_writes_binary_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let o = netmix(dir.path(), &["simulate", "--model", "graphon2", "--n", "80", "--degree", "20", "--seed", "7", "--out", "p.bin"]);
    assert_eq!(code(&o), 0);
    let p = ProbMatrix::read_binary(std::fs::File::open(dir.path().join("p.bin")).unwrap()).unwrap();
    assert!((p.expected_degree() - 20.0).abs() < 1e-9);
    let side: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("p.bin.json")).unwrap()).unwrap();
    assert_eq!(side["seed"], 7);
    assert_eq!(side["model"], "graphon2");
}

#[test]
fn estimate_is_reproducible_and_records_config() {
    let dir = tempfile::tempdir().unwrap();
    simulate_graph(dir.path());
    let args = ["--seed", "3", "estimate", "--graph", "g.edges", "--kmax", "4", "--holdout", "0.1", "--mixer", "nnl", "--out", "est.json"];
    assert_eq!(code(&netmix(dir.path(), &args)), 0);
    let first = std::fs::read(dir.path().join("est.json")).unwrap();
    let mut eight = args.to_vec();
    eight.extend(["--threads", "8"]);
    assert_eq!(code(&netmix(dir.path(), &eight)), 0);
    assert_eq!(std::fs::read(dir.path().join("est.json")).unwrap(), first);

    let json: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(json["strategy"], "nnl");
    assert_eq!(json["config"]["kmax"], 4);
    assert_eq!(json["graph"]["n"], 120);
    let weights = json["weights"].as_array().unwrap();
    assert_eq!(weights.len(), 9);
    assert!(weights.iter().all(|w| w.as_f64().unwrap() >= 0.0));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    simulate_graph(dir.path());
    std::fs::write(dir.path().join("run.conf"), "kmax = 2\nmixer = ecv\n").unwrap();
    let o = netmix(dir.path(), &["--config", "run.conf", "estimate", "--graph", "g.edges", "--mixer", "exp", "--out", "e.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("e.json")).unwrap()).unwrap();
    assert_eq!(json["strategy"], "exp");
    assert_eq!(json["weights"].as_array().unwrap().len(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulate_graph(dir.path());
    let bogus = netmix(dir.path(), &["estimate", "--graph", "g.edges", "--mixer", "bogus"]);
    assert_eq!(code(&bogus), 1);
    assert!(String::from_utf8_lossy(&bogus.stderr).contains("Usage"));
    assert_eq!(code(&netmix(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&netmix(dir.path(), &["estimate", "--graph", "missing.edges"])), 2);
    assert_eq!(code(&netmix(dir.path(), &["estimate", "--graph", "g.edges", "--kmax", "500"])), 2);
    assert_eq!(code(&netmix(dir.path(), &["--version"])), 0);
}

#[test]
fn linkpred_reports_auc_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulate_graph(dir.path());
    let o = netmix(dir.path(), &["--seed", "2", "linkpred", "--graph", "g.edges", "--kmax", "3", "--mixer", "nnl,ecv", "--out", "lp.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("lp.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3, "{text}");
}
