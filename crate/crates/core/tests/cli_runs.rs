use std::fs;
use std::path::Path;

use girsanov_bsde::cli::{run, RunConfig, RunOptions};
use sha2::{Digest, Sha256};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn compare_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"command": "compare", "tree": {"steps": 10, "horizon": 0.25}, "grid": {"x_min": -1, "x_max": 1, "points": 5}}"#;
    let cfg = write(dir.path(), "c.json", text);
    let out = dir.path().join("out");
    let v = run(&cfg, &RunOptions { out: Some(out.clone()), seed: Some(17) }).unwrap();
    assert!(v.pass);
    let csv = fs::read_to_string(out.join("compare_burgers.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,u_cm,u_fd,u_ch,rel_err_cm_ch"));
    assert_eq!(lines.count(), 5);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let hash: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(manifest["config_sha256"], hash.as_str());
    assert_eq!(manifest["seed"], 17);
    let verdict: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["pass"], true);
}

#[test]
fn repeated_runs_give_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.json",
        r#"{"command": "simulate-fbsde", "mc": {"paths": 2000, "steps": [4, 8], "oracle_dx": 0.02, "oracle_frames": 32, "ratio": 10}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&cfg, &RunOptions { out: Some(a.clone()), seed: Some(3) }).unwrap();
    run(&cfg, &RunOptions { out: Some(b.clone()), seed: Some(3) }).unwrap();
    assert_eq!(fs::read(a.join("mc_burgers.csv")).unwrap(), fs::read(b.join("mc_burgers.csv")).unwrap());
}

#[test]
fn girsanov_check_reports_max_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"command": "check-girsanov", "instances": {"count": 100}}"#);
    let v = run(&cfg, &RunOptions { out: Some(dir.path().join("o")), seed: None }).unwrap();
    assert!(v.pass);
    assert!(v.details["max_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn malformed_config_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    for text in [r#"{"command": "compare", "grid": {"x_min": 0, "x_max": 1, "points": 5, "spacing": 2}}"#, "{not json", r#"{"tree": {}}"#] {
        let cfg = write(dir.path(), "bad.json", text);
        let err = run(&cfg, &RunOptions { out: Some(dir.path().join("o")), seed: None }).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "json") {
            RunConfig::from_json(&fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 9);
}
