//! End-to-end runs of the `simlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use simlab::artifacts::Manifest;
use simlab::snapshot::read_snapshot;

fn simlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_SIMULATE: &str = r#"
seed = 11
[lattice]
n = 16
[solver]
nu = 0.5
dt = 0.1
[sampling]
horizon = 100.0
n_replicas = 2
"#;

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    simlab(&args)
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn verify_passes_and_reports_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 32);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 9);
    assert!(checks.iter().all(|c| c["max_residual"].as_f64().unwrap() <= c["tolerance"].as_f64().unwrap()));
}

#[test]
fn simulate_is_byte_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SIMULATE);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("simulate", &cfg, &a, &[]).status.success());
    assert!(run("simulate", &cfg, &b, &["--parallel", "2"]).status.success());
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert!(ma.artifacts.iter().any(|e| e.path == "moments.csv"));
    assert!(ma.artifacts.iter().any(|e| e.path.ends_with(".spf")));
    // the configs differ only in output_dir, which is echoed
    for (ea, eb) in ma.artifacts.iter().zip(&mb.artifacts) {
        assert_eq!(ea.path, eb.path);
        if ea.path != "config.toml" {
            assert_eq!(ea.sha256, eb.sha256, "{}", ea.path);
        }
    }
}

#[test]
fn snapshot_norm_matches_logged_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SIMULATE);
    let out = dir.path().join("out");
    assert!(run("simulate", &cfg, &out, &[]).status.success());
    let diag = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,h1,ha1,h2a\n"));
    let rows: Vec<Vec<f64>> = diag
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let mut compared = 0;
    for e in manifest(&out).artifacts.iter().filter(|e| e.path.ends_with("_r0000.spf")) {
        let (x, meta) = read_snapshot(&out.join(&e.path)).unwrap();
        let row = rows.iter().find(|r| (r[0] - meta.timestamp).abs() < 1e-9).unwrap();
        assert!((x.sobolev_norm(1.0) - row[1]).abs() <= 1e-14 * row[1], "{} vs {}", x.sobolev_norm(1.0), row[1]);
        assert_eq!((meta.nu, meta.alpha, meta.seed), (0.5, 2.0, 11));
        compared += 1;
    }
    assert!(compared > 0);
}

#[test]
fn empty_nu_list_is_a_config_error_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solver]\nnu_list = []\n");
    let out = dir.path().join("out");
    let o = run("sweep", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let log: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(log["kind"], "config");
    assert!(log["details"].as_array().unwrap().iter().any(|d| d.as_str().unwrap().contains("nu_list")));
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(saved, log);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn syntax_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\n[lattice\nn = 16\n");
    let o = run("verify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let log: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(log.to_string().contains("line 2"), "{log}");
}

#[test]
fn sweep_resumes_completed_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 5
[lattice]
n = 16
[solver]
nu_list = [0.5, 0.25]
dt = 0.1
[sampling]
horizon = 40.0
burn_in = 10.0
n_replicas = 2
snapshot_every = 1.0
[euler]
dt = 0.01
t_list = [0.5]
"#,
    );
    let out = dir.path().join("out");
    let first = run("sweep", &cfg, &out, &[]);
    assert!(matches!(first.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&first.stderr));
    let m1 = manifest(&out);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["resumed_points"].as_array().unwrap().len(), 0);

    let second = run("sweep", &cfg, &out, &[]);
    assert_eq!(first.status.code(), second.status.code());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["resumed_points"], serde_json::json!([0, 1]));
    // identical artifacts apart from the report, which records the resumption
    let m2 = manifest(&out);
    assert_eq!(m1.artifacts.len(), m2.artifacts.len());
    for (a, b) in m1.artifacts.iter().zip(&m2.artifacts) {
        if a.path != "report.json" {
            assert_eq!(a, b);
        }
    }

    // a damaged point is recomputed to the same bytes
    let victim = out.join("nu_0/report.json");
    std::fs::write(&victim, b"{}").unwrap();
    run("sweep", &cfg, &out, &[]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["resumed_points"], serde_json::json!([1]));
    let m3 = manifest(&out);
    assert_eq!(
        m1.artifacts.iter().find(|e| e.path == "nu_0/report.json"),
        m3.artifacts.iter().find(|e| e.path == "nu_0/report.json")
    );
    let invariance = std::fs::read_to_string(out.join("invariance.csv")).unwrap();
    assert!(invariance.starts_with("t,quantity,before,before_stderr,after,after_stderr,standardized_drift\n"));
}

#[test]
fn euler_check_writes_conservation_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[lattice]
n = 16
[euler]
dt = 0.01
horizon = 1.0
refinement_dts = [0.04, 0.02, 0.01]
"#,
    );
    let out = dir.path().join("out");
    let o = run("euler-check", &cfg, &out, &[]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["conservation"]["l2_drift"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["refinement"]["drifts"].as_array().unwrap().len(), 3);
    let exit_ok = o.status.success();
    assert_eq!(exit_ok, report["pass"].as_bool().unwrap());
}
