use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TANDEM: &str = r#"{"nodes": 3, "arrival_rates": [1, 0, 0], "service_rates": [2, 2, 2],
  "routing": [[0, 1, 0], [0, 0, 1], [0, 0, 0]]}"#;
const FEEDBACK: &str = r#"{"nodes": 1, "arrival_rates": [1], "service_rates": [3], "routing": [[0.5]]}"#;
const THREE: &str = r#"{"nodes": 3, "arrival_rates": [1, 0, 0], "service_rates": [3, 2, 3],
  "routing": [[0, 0.5, 0.5], [0, 0, 1], [0, 0, 0]]}"#;
const UNSTABLE: &str = r#"{"nodes": 1, "arrival_rates": [3], "service_rates": [2], "routing": [[0]]}"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn network(&self, name: &str, json: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, json).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsojourn")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

#[test]
fn analyze_tandem_reports_moments() {
    let ws = Workspace::new();
    let net = ws.network("tandem.json", TANDEM);
    let out = ws.out("a");
    let o = run(&["analyze", "--network", s(&net), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = summary(&out);
    assert_eq!(v["stable"], true);
    assert_eq!(v["exact"]["first_moment"][0], 3.0);
    assert_eq!(v["exact"]["variance"]["value"][0], 3.0);
    assert_eq!(v["exact"]["tandem_variance"]["value"][1], 2.0);
    assert_eq!(v["manifest"]["command"], "analyze");
}

#[test]
fn analyze_three_node_refuses_second_moments() {
    let ws = Workspace::new();
    let net = ws.network("three.json", THREE);
    let out = ws.out("a");
    let o = run(&["analyze", "--network", s(&net), "--out-dir", s(&out)]);
    assert!(o.status.success());
    let v = summary(&out);
    assert!(v["exact"]["first_moment"].is_array());
    let refused = v["exact"]["second_moment"]["refused"].as_str().unwrap();
    assert!(refused.contains("overtake-free"), "{refused}");
    assert_eq!(v["exact"]["correlation_condition"]["value"]["verdict"], "ConditionsFail");
    assert!(String::from_utf8_lossy(&o.stdout).contains("refused"));
}

#[test]
fn analyze_unstable_suppresses_moments() {
    let ws = Workspace::new();
    let net = ws.network("u.json", UNSTABLE);
    let out = ws.out("a");
    let o = run(&["analyze", "--network", s(&net), "--out-dir", s(&out)]);
    assert!(o.status.success());
    let v = summary(&out);
    assert_eq!(v["stable"], false);
    assert!(v["exact"].is_null());
}

#[test]
fn cdf_brackets_erlang_law() {
    let ws = Workspace::new();
    let net = ws.network("tandem.json", TANDEM);
    let out = ws.out("c");
    let o = run(&[
        "cdf", "--network", s(&net), "--epsilon", "1e-4", "--cap", "18", "--grid", "0:10:21", "--out-dir", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (headers, rows) = read_csv(&out.join("cdf_bounds.csv"));
    assert_eq!(headers, ["t", "lower", "upper"]);
    assert_eq!(rows.len(), 21);
    for row in rows {
        let [t, l, u] = [0, 1, 2].map(|i| row[i].parse::<f64>().unwrap());
        let erlang = 1.0 - (-t).exp() * (1.0 + t + t * t / 2.0);
        assert!(l <= erlang + 1e-12 && erlang <= u + 1e-12, "t={t}: {l} {erlang} {u}");
    }
    let v = summary(&out);
    assert_eq!(v["cap"], 18);
    assert_eq!(v["alpha"], 7.0);
    assert!(v["k"].as_u64().unwrap() > 0);
    assert_eq!(v["manifest"]["parameters"]["grid"], "0:10:21");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn cdf_default_grid_uses_mean() {
    let ws = Workspace::new();
    let net = ws.network("fb.json", FEEDBACK);
    let out = ws.out("c");
    let o = run(&["cdf", "--network", s(&net), "--epsilon", "1e-4", "--out-dir", s(&out)]);
    assert!(o.status.success());
    assert_eq!(summary(&out)["manifest"]["parameters"]["grid"], "0:10:101");
    let (_, rows) = read_csv(&out.join("cdf_bounds.csv"));
    assert_eq!(rows.len(), 101);
}

#[test]
fn cdf_compare_independent_adds_column() {
    let ws = Workspace::new();
    let net = ws.network("three.json", THREE);
    let out = ws.out("c");
    let o = run(&[
        "cdf", "--network", s(&net), "--path", "1,2,3", "--compare-independent", "--epsilon", "1e-3", "--cap", "8",
        "--grid", "0:8:9", "--out-dir", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (headers, rows) = read_csv(&out.join("cdf_bounds.csv"));
    assert_eq!(headers, ["t", "lower", "upper", "f_independent"]);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().is_ok()));
    assert_eq!(summary(&out)["independent_path"], serde_json::json!([1, 2, 3]));
}

#[test]
fn compare_independent_needs_path_when_routing_branches() {
    let ws = Workspace::new();
    let net = ws.network("three.json", THREE);
    let o = run(&["cdf", "--network", s(&net), "--compare-independent", "--out-dir", s(&ws.out("c"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let ws = Workspace::new();
    let net = ws.network("tandem.json", TANDEM);
    let (a, b) = (ws.out("a"), ws.out("b"));
    for out in [&a, &b] {
        let o = run(&["simulate", "--network", s(&net), "--tags", "2000", "--seed", "42", "--out-dir", s(out)]);
        assert!(o.status.success());
    }
    let first = fs::read(a.join("samples.csv")).unwrap();
    assert_eq!(first, fs::read(b.join("samples.csv")).unwrap());
    let (headers, rows) = read_csv(&a.join("samples.csv"));
    assert_eq!(headers, ["path", "node_sojourns", "total"]);
    assert_eq!(rows.len(), 2000);
    assert_eq!(rows[0][0], "1 2 3");
}

#[test]
fn simulate_path_filter() {
    let ws = Workspace::new();
    let net = ws.network("three.json", THREE);
    let out = ws.out("s");
    let o = run(&["simulate", "--network", s(&net), "--path", "1,2,3", "--tags", "500", "--out-dir", s(&out)]);
    assert!(o.status.success());
    let (_, rows) = read_csv(&out.join("samples.csv"));
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|r| r[0] == "1 2 3"));
    let v = summary(&out);
    assert_eq!(v["correlations"].as_array().unwrap().len(), 3);
}

#[test]
fn compare_writes_joined_tables() {
    let ws = Workspace::new();
    let net = ws.network("fb.json", FEEDBACK);
    let out = ws.out("m");
    let o = run(&[
        "compare", "--network", s(&net), "--tags", "20000", "--epsilon", "1e-5", "--out-dir", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (headers, rows) = read_csv(&out.join("compare.csv"));
    assert_eq!(headers, ["t", "L", "U", "F_independent", "empirical", "dkw_half_width", "flag"]);
    assert_eq!(rows.len(), 101);
    // feedback network: no independence approximation
    assert!(rows.iter().all(|r| r[3].is_empty()));
    let (headers, moments) = read_csv(&out.join("moments.csv"));
    assert_eq!(headers, ["order", "exact", "lower_bound", "simulated", "simulated_se"]);
    let [_, exact, lower, sim, se] = [0, 1, 2, 3, 4].map(|i| moments[0][i].parse::<f64>().unwrap());
    assert_eq!(exact, 2.0);
    assert!(lower <= exact && exact <= sim + 3.0 * se);
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let out = ws.out("x");
    let missing = ws.out("missing.json");
    assert_eq!(run(&["cdf", "--network", s(&missing), "--out-dir", s(&out)]).status.code(), Some(3));
    let bad = ws.network("bad.json", "{\"nodes\": 1}");
    assert_eq!(run(&["analyze", "--network", s(&bad), "--out-dir", s(&out)]).status.code(), Some(4));
    let unstable = ws.network("u.json", UNSTABLE);
    let o = run(&["cdf", "--network", s(&unstable), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("node 1"));
    let tandem = ws.network("t.json", TANDEM);
    let eps = run(&["cdf", "--network", s(&tandem), "--epsilon", "1.5", "--out-dir", s(&out)]);
    assert_eq!(eps.status.code(), Some(4));
    let grid = run(&["cdf", "--network", s(&tandem), "--grid", "5:1:10", "--out-dir", s(&out)]);
    assert_eq!(grid.status.code(), Some(2));
    let path = run(&["cdf", "--network", s(&tandem), "--path", "1,3", "--out-dir", s(&out)]);
    assert_eq!(path.status.code(), Some(4));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
