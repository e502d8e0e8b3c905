use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cgm(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cgm"));
    c.args(args).env_remove("CGM_SEED").env_remove("CGM_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn payload(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn markov_report_carries_the_invariant_targets() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("m.json");
    let csv = dir.path().join("m.csv");
    let out = cgm(
        &["markov", "--alpha", "0.3333333333333333", "--length", "20000", "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        &[],
    );
    assert!(out.status.code().is_some_and(|c| c <= 1), "{out:?}");
    let r = report(&json);
    assert_eq!(r["schema_version"], 1);
    let mu: Vec<f64> = r["data"]["chain"]["invariant_target"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    for (m, t) in mu.iter().zip([2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0, 4.0 / 9.0]) {
        assert!((m - t).abs() < 1e-12);
    }
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("from,to,count,frequency,target\n"));
    assert_eq!(table.lines().count(), 17);
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let out = cgm(&["classify", "--n", "400", "--seed", "5", "--json", p.to_str().unwrap()], &[]);
        assert!(out.status.success(), "{out:?}");
    }
    assert_eq!(payload(report(&a)), payload(report(&b)));
    assert!(report(&a)["timing"]["start_unix_ms"].as_u64().unwrap() > 0);
}

#[test]
fn config_precedence_and_manifest_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lab.conf");
    std::fs::write(&cfg, "# test config\nalpha = 0.4\nn = 80\n").unwrap();
    let json = dir.path().join("r.json");
    let out = cgm(
        &["--config", cfg.to_str().unwrap(), "lpp", "--n", "60", "--json", json.to_str().unwrap()],
        &[("CGM_SEED", "9")],
    );
    assert!(out.status.success(), "{out:?}");
    let m = &report(&json)["manifest"];
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["experiment"]["alpha"], 0.4);
    assert_eq!(m["config"]["experiment"]["n"], 60);
    assert_eq!(m["config"]["sources"]["n"], "flag");
    assert_eq!(m["config"]["sources"]["alpha"], "file");
    assert_eq!(m["config"]["sources"]["seed"], "env");
    assert_eq!(report(&json)["data"]["size"], 60);
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cgm(&["lpp", "--no-such-flag"], &[]).status.code(), Some(2));
    assert_eq!(cgm(&["frobnicate"], &[]).status.code(), Some(2));
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "alpha = 0.5\ncolour = blue\n").unwrap();
    let out = cgm(&["--config", cfg.to_str().unwrap(), "lpp"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    // Antidiagonal wider than the arrow window.
    let out = cgm(&["classify", "--n", "120", "--width", "64"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("window"));
    let out = cgm(&["lpp", "--alpha", "1.2"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn gate_failure_exits_1_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("f.json");
    // Equal sizes can never be strictly decreasing.
    let out = cgm(&["midpoint", "--ns", "4,4", "--replicas", "20", "--batches", "2", "--json", json.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let r = report(&json);
    assert_eq!(r["manifest"]["passed"], false);
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn render_trees_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("tree.svg");
    let json = dir.path().join("tree.json");
    let out = cgm(
        &["render", "trees", "--alpha", "0.5", "--n", "200", "--seed", "7", "--out", svg.to_str().unwrap(), "--json", json.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    for class in ["primal", "dual", "interface"] {
        assert!(text.contains(&format!("class=\"{class}\"")));
    }
    assert!(!report(&json)["data"]["interface"].as_array().unwrap().is_empty());
}

#[test]
fn verify_all_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("v.json");
    let csv = dir.path().join("v.csv");
    let out = cgm(
        &["verify-all", "--alpha", "0.5", "--n", "200", "--replicas", "40", "--seed", "7", "--only", "1", "--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()],
        &[("CGM_THREADS", "1")],
    );
    assert!(out.status.success(), "{out:?}");
    let r = report(&json);
    let groups: Vec<&str> = r["gates"].as_array().unwrap().iter().map(|g| g["group"].as_str().unwrap()).collect();
    assert!(groups.iter().any(|g| g.starts_with("modules")));
    assert!(groups.contains(&"criterion 1: oracle equivalence"));
    assert_eq!(r["manifest"]["config"]["threads"], 1);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("group,gate,passed,observed,bound\n"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS  1"));
}
