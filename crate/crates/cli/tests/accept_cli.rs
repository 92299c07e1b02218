use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convdens"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("convdens-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn error_kind(out: &Output) -> String {
    let text = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"));
    v["kind"].as_str().unwrap().to_string()
}

fn simulate(dir: &Path, extra: &[&str]) -> PathBuf {
    let seed = if extra.contains(&"--seed") { &[][..] } else { &["--seed", "11"][..] };
    let out = exe().args(["simulate", "--n", "1000"]).args(seed).args(extra).arg("--out").arg(dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("sample.csv")
}

#[test]
fn empty_sample_is_a_typed_error() {
    let dir = scratch("empty");
    let sample = dir.join("empty.csv");
    std::fs::write(&sample, "").unwrap();
    let out = exe().arg("estimate").arg("--sample").arg(&sample).arg("--out").arg(dir.join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "empty-sample");
}

#[test]
fn direct_estimate_has_one_row_per_point_and_clips() {
    let dir = scratch("direct");
    let sample = simulate(&dir.join("sim"), &[]);
    let out = exe()
        .args(["estimate", "--eval-count", "101", "--clip-nonnegative", "--sample"])
        .arg(&sample)
        .arg("--out")
        .arg(dir.join("est"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.join("est/density.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# convdens estimate config_hash="));
    assert_eq!(lines.next().unwrap(), "x1,k1,estimate,objective,boundary_hit");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    assert!(rows.iter().all(|r| r[2] >= 0.0));
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("est/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["inequality_audit"]["violations"], 0);
    assert!(diag["clipped_mass"].is_number());
}

#[test]
fn estimates_are_reproducible_and_seeded() {
    let dir = scratch("repro");
    let a = simulate(&dir.join("a"), &["--alpha", "0.3", "--noise", "gaussian:0.5"]);
    let b = simulate(&dir.join("b"), &["--alpha", "0.3", "--noise", "gaussian:0.5"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = simulate(&dir.join("c"), &["--alpha", "0.3", "--noise", "gaussian:0.5", "--seed", "12"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn kernel_inspection_reports_constants() {
    let dir = scratch("inspect");
    let out = exe().args(["inspect-kernel", "--h", "0.5"]).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("constants.json")).unwrap()).unwrap();
    assert!(v["constants"]["gamma"].as_array().unwrap().iter().all(|g| g.as_f64() == Some(0.0)));
    assert!(v["constants"]["m_inf"].as_f64().unwrap() > 0.0);

    let out = exe().args(["inspect-kernel", "--alpha", "1", "--noise", "gaussian"]).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "assumption-violated");
}

#[test]
fn benchmark_validation_happens_before_compute() {
    let dir = scratch("bench");
    let out = exe().args(["benchmark", "--n", "100,200", "--replicates", "0"]).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "invalid-input");
    let out = exe().args(["benchmark", "--n", "100", "--kernel", "gauss"]).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(error_kind(&out), "unknown-kernel");
    assert!(String::from_utf8_lossy(&out.stderr).contains("bspline8"));
    assert!(!dir.join("report.json").exists());
}

#[test]
fn benchmark_writes_report_files() {
    let dir = scratch("bench-ok");
    let out = exe()
        .args(["benchmark", "--n", "300,600", "--replicates", "2", "--seed", "3"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 3);
    assert_eq!(report["scenario"]["replicates"], 2);
    assert_eq!(report["oracle"].as_array().unwrap().len(), 2);
    let risk = std::fs::read_to_string(dir.join("risk.csv")).unwrap();
    assert!(risk.lines().nth(1).unwrap().starts_with("n,method,"));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "seed = 99\nkernel = \"epanechnikov\"\n[noise]\nalpha = 0.5\nlaw = { kind = \"laplace\", scale = 1.0 }\n").unwrap();
    let out = exe().arg("inspect-kernel").arg("--config").arg(&cfg).args(["--kernel", "bspline6"]).arg("--out").arg(&dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("constants.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 99);
    assert_eq!(v["kernel"], "bspline6");
    assert_eq!(v["config"]["noise"]["alpha"], 0.5);

    std::fs::write(&cfg, "sed = 1\n").unwrap();
    let out = exe().arg("inspect-kernel").arg("--config").arg(&cfg).arg("--out").arg(&dir).output().unwrap();
    assert_eq!(error_kind(&out), "parse-error");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = exe().args(["estimate", "--sample", "x.csv", "--bandwidth", "1"]).output().unwrap();
    assert!(!out.status.success());
    let help = exe().args(["benchmark", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&help.stdout);
    for flag in ["--alpha", "--noise", "--kernel", "--grid-mode", "--p", "--k-min", "--k-max", "--n", "--replicates", "--seed", "--out", "--threads"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}
