use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shearguide")).args(args).output().expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn thresholds_unit_square() {
    let o = run(&["thresholds", "--beta", "1", "--rect", "0,1,0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!((v["E1"].as_f64().unwrap() - 3.0 * PI * PI).abs() < 1e-9);
    assert!((v["beta_star"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-10);
}

#[test]
fn thresholds_tall_rectangle() {
    let o = run(&["thresholds", "--beta", "1", "--rect", "0,1,0,4.442883"]);
    let v = json_out(&o);
    assert!((v["beta_star"].as_f64().unwrap() - 1.1321).abs() < 1e-4);
}

#[test]
fn invalid_arguments_exit_2() {
    assert_eq!(run(&["thresholds", "--beta", "-1", "--rect", "0,1,0,1"]).status.code(), Some(2));
    assert_eq!(run(&["thresholds", "--beta", "1", "--rect", "0,1,0"]).status.code(), Some(2));
    assert_eq!(run(&["thresholds", "--beta", "1"]).status.code(), Some(2));
    assert_eq!(run(&["thresholds", "--bogus"]).status.code(), Some(2));
}

#[test]
fn config_with_unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"beta": 1, "rect": [0, 1, 0, 1], "colour": "red"}"#).unwrap();
    let o = run(&["spectrum", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn coarse_grid_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"beta": 1, "rect": [0, 1, 0, 1], "grid": [4, 4, 4]}"#).unwrap();
    let out = dir.path().join("out");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_unit_square() {
    let o = run(&["certify", "--beta", "1", "--rect", "0,1,0,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!((v["cross_term"].as_f64().unwrap() + 0.5).abs() < 1e-10);
    assert_eq!(v["verdict"], "negative");
    assert_eq!(v["certified"], true);
}

#[test]
fn straight_tube_has_no_bound_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("straight.json");
    std::fs::write(
        &cfg,
        r#"{"beta": 0, "mode": "straight", "rect": [0, 1, 0, 1], "grid": [16, 8, 8], "L": 2, "mesh_rungs": 2}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("eigenvalues.csv"));
    assert_eq!(
        rows[0],
        ["beta", "mode", "rung", "L", "nx", "n1", "n2", "j", "lambda", "residual", "below_threshold", "flags"]
    );
    assert!(rows[1..].iter().all(|r| r[10] == "false"));
    assert!(out.join("manifest.json").exists());
    assert!(out.join("report.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &str| {
        vec![
            "spectrum".to_string(),
            "--beta".into(),
            "1".into(),
            "--rect".into(),
            "0,1,0,1".into(),
            "--mode".into(),
            "reduced".into(),
            "--grid".into(),
            "16,8,8".into(),
            "--L".into(),
            "3".into(),
            "--mesh-rungs".into(),
            "2".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            o.into(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let argv = args(d.to_str().unwrap());
        let refs: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        let o = run(&refs);
        assert!(matches!(o.status.code(), Some(0) | Some(4)));
    }
    for f in ["eigenvalues.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m: Value = serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    assert!(m["versions"]["shearguide"].is_string());
    // every float in the CSV has at most 12 significant digits
    for row in csv_rows(&a.join("eigenvalues.csv")).iter().skip(1) {
        let digits: String = row[8].split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
        assert!(digits.trim_start_matches('0').len() <= 12, "{}", row[8]);
    }
}

#[test]
fn sweep_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = run(&[
        "sweep",
        "--betas",
        "0.5,1,2",
        "--rect",
        "0,1,0,1",
        "--mode",
        "reduced",
        "--grid",
        "24,8,8",
        "--mesh-rungs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows[1..] {
        assert!(r[2].parse::<usize>().unwrap() >= 1);
    }
}

#[test]
fn oracle_compare_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "oracle-compare",
        "--beta",
        "1",
        "--rect",
        "0,1,0,1",
        "--grid",
        "16,8,8",
        "--L",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().find(|l| l.starts_with("max separation residual")).unwrap();
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value <= 1e-10);
    assert!(out.join("separation.csv").exists());
}

#[test]
fn convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = run(&[
        "convergence",
        "--beta",
        "1",
        "--rect",
        "0,1,0,1",
        "--mode",
        "reduced",
        "--grid",
        "16,8,8",
        "--L",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)));
    let rows = csv_rows(&out.join("convergence.csv"));
    assert_eq!(rows[0][0], "j");
    assert!(rows.iter().any(|r| r[1] == "ext"));
    assert!(rows.iter().any(|r| r[1] == "h2"));
}

#[test]
fn broken_strip_benchmark_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("benchmark.json");
    let height = PI * 2f64.sqrt();
    std::fs::write(
        &cfg,
        format!(
            r#"{{"beta": 1, "rect": [0, 1, 0, {height}], "mode": "reduced", "grid": [256, 8, 16], "L": 60, "mesh_rungs": 2}}"#
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("eigenvalues.csv"));
    let below: Vec<&Vec<String>> = rows.iter().filter(|r| r[2] == "ext" && r[10] == "true").collect();
    assert_eq!(below.len(), 1);
    let lambda: f64 = below[0][8].parse().unwrap();
    assert!((lambda - 10.80).abs() < 0.01, "{lambda}");
}
