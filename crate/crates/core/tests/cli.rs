mod common;

use std::fs;

use common::{binary, check_dot, demo_data, DEMO_COLUMNS};

fn run(args: &[&str]) -> std::process::Output {
    binary().args(args).output().expect("binary runs")
}

fn analyze(extra: &[&str]) -> std::process::Output {
    let data = demo_data();
    let mut args = vec!["analyze", data.to_str().unwrap()];
    args.extend(DEMO_COLUMNS);
    args.extend(extra);
    run(&args)
}

const SMALL_TOML: &str = r#"
runs = 300
seed = 7
[[scenario]]
n = [5, 5, 5]
mu = [10, 10, 12]
sd = [1, 1, 1]
[[scenario]]
name = "null"
n = [4, 6, 6]
mu = [0, 0, 0]
sd = [1, 2, 2]
"#;

#[test]
fn analyze_is_deterministic_across_threads() {
    let a = analyze(&["--threads", "1"]);
    let b = analyze(&["--threads", "4"]);
    let c = analyze(&[]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["schema"], "dunnett-ctp/analysis");
    assert_eq!(v["model"]["model"]["additive"]["blocks"], 2);
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, SMALL_TOML).unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = run(&["simulate", cfg, "--threads", "1"]);
    let b = run(&["simulate", cfg, "--threads", "3"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("n1,n2,n3,s1,s2,s3,m2,m3,"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn tree_matches_emitted_tree_and_parses() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let trees = dir.path().join("trees");
    let out = analyze(&["--out", report.to_str().unwrap(), "--emit-tree", trees.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let redrawn = dir.path().join("redrawn");
    let out = run(&["tree", report.to_str().unwrap(), "--out", redrawn.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for m in ["ctp-du", "ctp-f", "ctp-gm"] {
        let a = fs::read_to_string(trees.join(format!("{m}.dot"))).unwrap();
        let b = fs::read_to_string(redrawn.join(format!("{m}.dot"))).unwrap();
        assert_eq!(a, b, "{m}");
        let (nodes, edges) = check_dot(&a).unwrap_or_else(|e| panic!("{m}: {e}"));
        assert_eq!(nodes.len(), 15);
        // Each S with |S| < 4 has 4 − |S| supersets one level up.
        assert_eq!(edges.len(), 4 * 3 + 6 * 2 + 4);
    }
    assert!(!trees.join("dunnett.dot").exists());
}

#[test]
fn dot_checker_rejects_malformed_input() {
    assert!(check_dot("digraph g { a [label=\"x]; }").is_err());
    assert!(check_dot("digraph g { a -> b; }").is_err());
    assert!(check_dot("graph g { }").is_err());
    assert!(check_dot("digraph g {\n  a [label=\"x\\\"y\", style=solid];\n  b;\n}").is_err());
    assert!(check_dot("digraph g {\n  a [label=\"x\\\"y\", style=solid];\n}").is_ok());
}

#[test]
fn data_and_usage_errors_exit_2() {
    let out = analyze(&["--method", "tukey"]);
    assert_eq!(out.status.code(), Some(2));
    let data = demo_data();
    let out = run(&["analyze", data.to_str().unwrap(), "--group-column", "dose", "--response-column", "pain", "--block-column", "sex"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`sex`"));
    let out = run(&["analyze", "/nonexistent/file.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[[scenario]]\nn = [5, 5]\nmu = [0, 0]\nsd = [1, -1]\n").unwrap();
    let out = run(&["simulate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tree_of_single_step_only_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    assert!(analyze(&["--method", "dunnett", "--out", report.to_str().unwrap()]).status.success());
    assert_eq!(run(&["tree", report.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn two_group_dunnett_is_the_pooled_t_test() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("two.csv");
    fs::write(&data, "group,response\nc,1.0\nc,2.0\nc,1.5\nt,2.5\nt,3.1\nt,2.2\n").unwrap();
    let out = run(&["analyze", data.to_str().unwrap(), "--control-label", "c", "--full-precision"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = v["results"].as_array().unwrap();
    let p: Vec<f64> = results.iter().map(|r| r["adjusted"][0].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12), "{p:?}");
    assert!(p[0] > 0.0 && p[0] < 0.05);
}

#[test]
fn summary_and_single_run_smoke() {
    let data = demo_data();
    let mut args = vec!["summary", data.to_str().unwrap()];
    args.extend(&DEMO_COLUMNS[..4]);
    let out = run(&args);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 6);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, SMALL_TOML).unwrap();
    let start = std::time::Instant::now();
    let out = run(&["simulate", cfg.to_str().unwrap(), "--runs", "1", "--format", "json"]);
    assert!(out.status.success());
    assert!(start.elapsed().as_secs() < 5);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_array());
}
