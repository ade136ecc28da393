use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mosco_flow::runner::sha256_hex;

const BIN: &str = env!("CARGO_BIN_EXE_mosco-flow");

const DBC: &str = "\
[experiment]
experiment = dynamic-bc
p = 2
tau_list = 1, 0.1
mode = to_neumann
cells = 16
T = 0.05
N = 10
initial_data = cosine
seed = 7
";

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("case.ini");
    fs::write(&path, body).unwrap();
    path
}

fn run(dir: &Path, body: &str, threads: Option<&str>) -> Output {
    let cfg = write_config(dir, body);
    let mut cmd = Command::new(BIN);
    cmd.args([
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.join("out").to_str().unwrap(),
    ]);
    match threads {
        Some(t) => cmd.env("MOSCO_FLOW_THREADS", t),
        None => cmd.env_remove("MOSCO_FLOW_THREADS"),
    };
    cmd.output().unwrap()
}

#[test]
fn version_prints_the_build_id() {
    let out = Command::new(BIN).arg("version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("mosco-flow 0.1.0"));
}

#[test]
fn run_writes_report_trajectories_and_a_consistent_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), DBC, Some("2"));
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("out");
    let report = fs::read_to_string(dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 3);
    assert!(report.starts_with("experiment,param_name,param,"));
    for name in ["traj_1.dat", "traj_0.1.dat", "manifest"] {
        assert!(dir.join(name).is_file(), "{name} missing");
    }
    let manifest = fs::read_to_string(dir.join("manifest")).unwrap();
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("status = ok"));
    assert!(manifest.contains("build = mosco-flow 0.1.0"));
    assert!(manifest.contains(&format!("sha256 = {}", sha256_hex(DBC.as_bytes()))));
    assert!(manifest.contains("| tau_list = 1, 0.1"));
    let files: Vec<&str> = manifest
        .split("[files]\n")
        .nth(1)
        .unwrap()
        .lines()
        .collect();
    assert_eq!(files.len(), 3);
    for line in files {
        let (sum, name) = line.split_once("  ").unwrap();
        assert_eq!(
            sum,
            sha256_hex(&fs::read(dir.join(name)).unwrap()),
            "{name}"
        );
    }
}

#[test]
fn empty_sweep_list_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &DBC.replace("tau_list = 1, 0.1", "tau_list ="),
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau_list"));
}

#[test]
fn unknown_key_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &format!("{DBC}colour = blue\n"), None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 11"));
}

#[test]
fn invalid_thread_cap_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), DBC, Some("zero"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_and_unwritable_output_are_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["run", tmp.path().join("absent.ini").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = write_config(tmp.path(), DBC);
    let out = Command::new(BIN)
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--out",
            blocker.join("sub").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn solver_failure_exits_3_and_keeps_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let body = DBC.replace("p = 2", "p = 1.5") + "\n[prox]\nmax_iter = 1\n";
    let out = run(tmp.path(), &body, None);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = fs::read_to_string(tmp.path().join("out/manifest")).unwrap();
    assert!(manifest.contains("status = failed"));
    assert!(manifest.contains("failure = "));
}

#[test]
fn selftest_passes_and_detects_a_quadrature_mutation() {
    let ok = Command::new(BIN).arg("selftest").output().unwrap();
    assert!(ok.status.success());
    assert!(!String::from_utf8_lossy(&ok.stdout).contains("FAIL"));
    let bad = Command::new(BIN)
        .args(["selftest", "--mutate", "quad"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stdout).contains("FAIL"));
}
