use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn thicket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thicket")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thicket-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn svc_build_depth_two() {
    let out = thicket(&["svc-build", "--r-const", "1/2", "--depth", "2", "--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["result"]["count"], 4);
    assert_eq!(doc["result"]["measure"], "1/4");
    assert_eq!(doc["result"]["intervals"][1], serde_json::json!(["3", "16", "1", "4"]));
    assert!(doc["producer"].as_str().unwrap().starts_with("thicket svc-build config="));
}

#[test]
fn thickness_of_the_full_line() {
    let text = stdout(&thicket(&["thickness", "--set", "full-line", "--L", "0.25"]));
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# thicket thickness config="));
    assert_eq!(lines[1], "L,theta,argmin_x,lower_bound,upper_bound");
    assert_eq!(lines[2], "1/4,1,0,,");
}

#[test]
fn fit_alpha_recovers_one_half() {
    let out = thicket(&[
        "fit-alpha", "--parametric", "1/2,1,1/2", "--depth", "24", "--format", "json",
    ]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let alpha = doc["result"]["fit"]["alpha_hat"].as_f64().unwrap();
    assert!((0.45..=0.55).contains(&alpha), "{alpha}");
}

#[test]
fn csv_is_deterministic_and_manifest_matches() {
    let dir = scratch("determinism");
    let config = write_config(
        &dir,
        r#"{"command": "spectral", "seed": 5, "parameters": {
            "grid": {"X": 8, "N": 256},
            "omega": {"complement-of": {"random": {"count": 6, "lo": -1, "hi": 1, "den": 64}}},
            "lambdas": {"geometric": {"lo": 1, "hi": 200, "count": 9}}}}"#,
    );
    let mut texts = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let csv = dir.join(format!("run{i}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_thicket"))
            .args(["run", "--config", config.to_str().unwrap(), "--output", csv.to_str().unwrap()])
            .env("THICKET_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let first = String::from_utf8(texts[0].clone()).unwrap();
    let hash = first.lines().next().unwrap().rsplit('=').next().unwrap().to_string();
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run0.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], hash);
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["config"]["parameters"]["grid"]["N"], 256);
    assert_eq!(first.lines().nth(1), Some("lambda,d_lambda"));
    // a different seed is a different set
    let other = thicket(&["run", "--config", config.to_str().unwrap(), "--seed", "6"]);
    assert_ne!(stdout(&other).as_bytes(), &texts[0][..]);
}

#[test]
fn schema_errors_exit_two_with_a_pointer() {
    let dir = scratch("schema");
    let config = write_config(
        &dir,
        r#"{"command": "svc-build", "parameters": {"svc": {"mode": "explicit", "ratios": ["1/0"]}, "depth": 2}}"#,
    );
    let out = thicket(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/parameters/svc") && err.contains("1/0"), "{err}");

    let out = thicket(&["thickness", "--set", "full-line", "--L", "1/4", "--param", "colour=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/parameters/colour"));

    let out = thicket(&["spectral", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/command"));
}

#[test]
fn bad_thread_cap_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_thicket"))
        .args(["thickness", "--set", "full-line", "--L", "1/4"])
        .env("THICKET_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    // a sliver of the window at high frequency: d(λ) is below double precision
    let out = thicket(&[
        "spectral", "--X", "8", "--N", "512", "--omega", "0:1/64", "--lambdas", "3000",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn observability_of_the_full_window_is_at_most_one_over_t() {
    let out = thicket(&[
        "observability", "--X", "8", "--N", "64", "--omega", "-4:4", "--s", "1", "--T", "0.5,1",
        "--lambda-max", "20", "--quad-nodes", "8",
    ]);
    let text = stdout(&out);
    for line in text.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let (t, c): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        assert!(c <= 1.0 / t + 1e-6, "{line}");
        assert_eq!(f[2], "");
    }
}

#[test]
fn checked_in_experiments_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert!(doc["command"].is_string() && doc["parameters"].is_object(), "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 10, "{seen}");
}

#[test]
fn tuple_flags_check_their_arity() {
    let out = thicket(&["svc-build", "--geometric", "1/2", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--geometric"));
}
