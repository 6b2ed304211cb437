use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SWEEP: &str = r#"{
  "experiment": "erasure-sweep",
  "channels": ["identity(2)"],
  "grid": { "lambda": [0.005, 0.01, 0.3] },
  "optimizer": { "restarts": 2, "max_iters": 100 },
  "seed": 4,
  "out": { "csv": "s.csv", "json": "s.json", "svg": "s.svg" }
}"#;

fn herald(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_herald"))
        .current_dir(dir)
        .env_remove("HERALD_CACHE_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(stdout.lines().last().expect("summary line")).expect("summary is JSON")
}

fn outputs(dir: &Path) -> Vec<Vec<u8>> {
    ["s.csv", "s.json", "s.svg"].iter().map(|f| fs::read(dir.join(f)).unwrap()).collect()
}

fn setup(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sweep.json"), config).unwrap();
    dir
}

#[test]
fn rerun_hits_cache_with_identical_bytes() {
    let dir = setup(SWEEP);
    let first = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(summary(&first)["cached"], false);
    let bytes = outputs(dir.path());
    assert!(dir.path().join(".cache").is_dir());

    let second = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(summary(&second)["cached"], true);
    assert_eq!(outputs(dir.path()), bytes);

    // a cold cache reproduces the same bytes
    fs::remove_dir_all(dir.path().join(".cache")).unwrap();
    let third = herald(dir.path(), &["--jobs", "1", "run", "sweep.json"]);
    assert_eq!(summary(&third)["cached"], false);
    assert_eq!(outputs(dir.path()), bytes);
}

#[test]
fn corrupt_cache_entry_is_recomputed() {
    let dir = setup(SWEEP);
    let first = herald(dir.path(), &["run", "sweep.json"]);
    let fp = summary(&first)["fingerprint"].as_str().unwrap().to_string();
    let bytes = outputs(dir.path());
    let entry = dir.path().join(".cache").join(format!("{fp}.json"));
    let text = fs::read_to_string(&entry).unwrap();
    fs::write(&entry, text.replacen("PASS", "PASX", 1).replacen("0.3", "0.4", 1)).unwrap();

    let second = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(summary(&second)["cached"], false);
    assert!(String::from_utf8_lossy(&second.stderr).contains("corrupt cache entry"));
    assert_eq!(outputs(dir.path()), bytes);
    // the entry was rewritten and is served again
    assert_eq!(summary(&herald(dir.path(), &["run", "sweep.json"]))["cached"], true);
}

#[test]
fn cache_dir_from_environment() {
    let dir = setup(SWEEP);
    let cache = dir.path().join("elsewhere");
    let out = Command::new(env!("CARGO_BIN_EXE_herald"))
        .current_dir(dir.path())
        .env("HERALD_CACHE_DIR", &cache)
        .args(["run", "sweep.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let fp = summary(&out)["fingerprint"].as_str().unwrap().to_string();
    assert!(cache.join(format!("{fp}.json")).is_file());
    assert!(!dir.path().join(".cache").exists());
}

#[test]
fn fingerprint_ignores_key_order_and_outputs() {
    let dir = setup(SWEEP);
    let a = summary(&herald(dir.path(), &["run", "sweep.json"]));
    let reordered = r#"{
      "seed": 4,
      "out": { "csv": "other.csv" },
      "optimizer": { "max_iters": 100, "restarts": 2 },
      "grid": { "lambda": [0.005, 0.01, 0.3] },
      "channels": ["identity(2)"],
      "experiment": "erasure-sweep"
    }"#;
    fs::write(dir.path().join("reordered.json"), reordered).unwrap();
    let b = summary(&herald(dir.path(), &["run", "reordered.json"]));
    assert_eq!(a["fingerprint"], b["fingerprint"]);
    assert_eq!(b["cached"], true);
    let c = summary(&herald(dir.path(), &["--seed", "5", "run", "sweep.json"]));
    assert_ne!(a["fingerprint"], c["fingerprint"]);
}

#[test]
fn timings_fill_the_wall_column() {
    let dir = setup(SWEEP);
    herald(dir.path(), &["run", "sweep.json"]);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
    herald(dir.path(), &["run", "--timings", "sweep.json"]);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));
}

#[test]
fn malformed_grid_names_the_field() {
    let dir = setup(&SWEEP.replace(r#"[0.005, 0.01, 0.3]"#, r#""0.1:0.5""#));
    let out = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.lambda"));

    let dir = setup(&SWEEP.replace(r#""lambda""#, r#""lamda""#));
    let out = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));

    let dir = setup(&SWEEP.replace("identity(2)", "missing.json"));
    assert_eq!(herald(dir.path(), &["run", "sweep.json"]).status.code(), Some(2));
}

#[test]
fn inconclusive_only_exits_with_four() {
    let dir = setup(&SWEEP.replace(r#"[0.005, 0.01, 0.3]"#, r#"[0.2, 0.3]"#));
    let out = herald(dir.path(), &["run", "sweep.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(summary(&out)["inconclusive_hypothesis"], 2);
}

#[test]
fn guard_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let out = herald(dir.path(), &["game", "multibob", "--games", "chsh,chsh,chsh", "--dA", "4", "--dB", "4"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let out = herald(dir.path(), &["bounds", "binomial", "--channel", "identity(2)", "--n", "6", "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn single_result_commands() {
    let dir = TempDir::new().unwrap();
    let out = herald(dir.path(), &["game", "value", "--game", "chsh", "--mode", "classical"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["exact"], "3/4");

    let out = herald(dir.path(), &["channel", "inspect", "erasure(identity(2), 0.5)"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["out_dims"], serde_json::json!([2, 2]));
    assert_eq!(v["flag_sectors"], 2);

    let out = herald(dir.path(), &["holevo", "identity(2)", "--restarts", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let out = herald(dir.path(), &["bounds", "correction", "--lambda", "0.3", "--d", "2"]);
    assert_eq!(out.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"], "inf");

    let out = herald(dir.path(), &["esq", "--state", "bell", "--restarts", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v[0]["upper"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    assert_eq!(herald(dir.path(), &["channel", "inspect", "depolarizing(2, 7)"]).status.code(), Some(2));
}

#[test]
fn render_writes_svg() {
    let dir = TempDir::new().unwrap();
    let series = r#"{"style": {"title": "t"}, "series": [{"label": "a", "points": [[0, 1], [1, 2]]}]}"#;
    fs::write(dir.path().join("series.json"), series).unwrap();
    let out = herald(dir.path(), &["--out", "plot.svg", "render", "series.json"]);
    assert_eq!(out.status.code(), Some(0));
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));

    fs::write(dir.path().join("bad.json"), r#"{"series": []}"#).unwrap();
    assert_eq!(herald(dir.path(), &["render", "bad.json"]).status.code(), Some(1));
}
