//! `mosco-flow run`: evaluates a sweep on a bounded worker pool and writes
//! `report.csv`, one `traj_<param>.dat` per swept value and `manifest`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mosco_core::experiments::{Plan, PointOutput, SweepReport};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{canonical, RunConfig};

pub const THREADS_ENV: &str = "MOSCO_FLOW_THREADS";

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Solver(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
            RunError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

/// Worker cap from `MOSCO_FLOW_THREADS`; `None` means all cores.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, RunError> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(RunError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

pub fn build_id() -> String {
    let profile = if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    };
    format!(
        "{} {} ({profile})",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    )
}

/// File-name form of a swept value.
pub fn param_token(x: f64) -> String {
    x.to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Debug)]
pub struct RunSummary {
    pub report: SweepReport,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub files: Vec<(String, String)>,
}

/// Writes `name` into `dir` and records its checksum.
fn emit(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    files: &mut Vec<(String, String)>,
) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    files.push((name.to_string(), sha256_hex(bytes)));
    Ok(())
}

fn write_manifest(
    cfg: &RunConfig,
    workers: usize,
    started: Instant,
    failures: &[String],
    flags: &[(&'static str, bool)],
    files: &[(String, String)],
) -> Result<(), RunError> {
    let status = if failures.is_empty() { "ok" } else { "failed" };
    let mut m = String::new();
    m.push_str("# mosco-flow run manifest\n");
    m.push_str(&format!("build = {}\n", build_id()));
    m.push_str(&format!("seed = {}\n", cfg.experiment.seed));
    m.push_str(&format!("experiment = {}\n", cfg.experiment.experiment));
    m.push_str(&format!("threads = {workers}\n"));
    m.push_str(&format!("status = {status}\n"));
    m.push_str(&format!(
        "wall_time_s = {:.3}\n",
        started.elapsed().as_secs_f64()
    ));
    for f in failures {
        m.push_str(&format!("failure = {f}\n"));
    }
    m.push_str("\n[flags]\n");
    for (name, value) in flags {
        m.push_str(&format!("{name} = {value}\n"));
    }
    m.push_str("\n[resolved]\n");
    m.push_str(&canonical(&cfg.experiment));
    m.push_str(&format!("output_dir = {}\n", cfg.output_dir.display()));
    m.push_str("\n[config]\n");
    m.push_str(&format!(
        "sha256 = {}\n",
        sha256_hex(cfg.source_text.as_bytes())
    ));
    for line in cfg.source_text.lines() {
        m.push_str("| ");
        m.push_str(line);
        m.push('\n');
    }
    m.push_str("\n[files]\n");
    for (name, sum) in files {
        m.push_str(&format!("{sum}  {name}\n"));
    }
    let path = cfg.output_dir.join("manifest");
    fs::write(&path, m).map_err(|e| io_err(&path, e))
}

/// Runs the sweep with at most `threads` workers. Rows and trajectories are
/// collected and written in the order of the configured list.
pub fn run(cfg: &RunConfig, threads: Option<usize>) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    cfg.experiment
        .validate()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| io_err(dir, e))?;
    let _ = fs::remove_file(&probe);

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| RunError::Solver(format!("thread pool: {e}")))?;
    let workers = pool.current_num_threads();

    let planned = pool.install(|| {
        let plan = Plan::new(&cfg.experiment)?;
        let outcomes: Vec<mosco_core::Result<PointOutput>> = (0..plan.params().len())
            .into_par_iter()
            .map(|i| plan.run_point(i))
            .collect();
        Ok::<_, mosco_core::Error>((plan, outcomes))
    });
    let (plan, outcomes) = match planned {
        Ok(x) => x,
        Err(e) => {
            let failures = vec![format!("reference computation: {e}")];
            write_manifest(cfg, workers, started, &failures, &[], &[])?;
            return Err(RunError::Solver(failures.join("; ")));
        }
    };

    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for (param, outcome) in plan.params().iter().zip(outcomes) {
        match outcome {
            Ok(o) => completed.push(o),
            Err(e) => failures.push(format!("{}={param}: {e}", plan.param_name())),
        }
    }
    let report = plan.finish(completed);

    let mut files = Vec::new();
    emit(dir, "report.csv", report.to_csv().as_bytes(), &mut files)?;
    for (param, traj) in &report.trajectories {
        let name = format!("traj_{}.dat", param_token(*param));
        emit(dir, &name, traj.to_text().as_bytes(), &mut files)?;
    }
    write_manifest(cfg, workers, started, &failures, &report.flags(), &files)?;

    if !failures.is_empty() {
        return Err(RunError::Solver(failures.join("; ")));
    }
    Ok(RunSummary {
        report,
        output_dir: dir.clone(),
        threads: workers,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_cap_parsing() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("3")).unwrap(), Some(3));
        assert!(thread_cap(Some("0")).is_err());
        assert!(thread_cap(Some("lots")).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(String::new()).exit_code(), 2);
        assert_eq!(RunError::Solver(String::new()).exit_code(), 3);
        assert_eq!(RunError::Io(String::new()).exit_code(), 4);
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
