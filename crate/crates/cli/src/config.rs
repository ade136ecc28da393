//! Flat `key = value` configuration with `[section]` headers.
//!
//! ```text
//! [experiment]
//! experiment = graph-limit
//! p = 2
//! eps_list = 1/8, 1/16, 1/32
//! [prox]
//! tol = 1e-10
//! [output]
//! output_dir = out/graph-limit
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use mosco_core::connect::{DeltaSchedule, TauMode};
use mosco_core::experiments::{ExperimentConfig, ExperimentKind};
use mosco_core::profiles::Profile;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is not tied to a line.
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(
                f,
                "line {}: field `{}`: {}",
                self.line, self.field, self.message
            )
        } else {
            write!(f, "field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// A parsed run description: the experiment plus where to write it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub output_dir: PathBuf,
    /// The config file verbatim, echoed into the manifest.
    pub source_text: String,
}

const SECTIONS: [(&str, &[&str]); 3] = [
    (
        "experiment",
        &[
            "experiment",
            "family",
            "p",
            "n",
            "eps_list",
            "tau_list",
            "mode",
            "T",
            "N",
            "lambda",
            "initial_data",
            "seed",
            "cells",
            "layers",
            "resolution_factor",
            "delta",
        ],
    ),
    ("prox", &["tol", "max_iter", "method", "resolvent_lambda"]),
    ("output", &["output_dir"]),
];

fn parse_real(line: usize, field: &str, v: &str) -> Result<f64, ConfigError> {
    let v = v.trim();
    let value = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|_| err(line, field, format!("`{v}` is not a number")))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|_| err(line, field, format!("`{v}` is not a number")))?;
            a / b
        }
        None => v
            .parse()
            .map_err(|_| err(line, field, format!("`{v}` is not a number")))?,
    };
    if !value.is_finite() {
        return Err(err(line, field, format!("`{v}` is not finite")));
    }
    Ok(value)
}

fn parse_list(line: usize, field: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| parse_real(line, field, s))
        .collect()
}

fn parse_uint<T: std::str::FromStr>(line: usize, field: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| {
        err(
            line,
            field,
            format!("`{}` is not a non-negative integer", v.trim()),
        )
    })
}

/// `none`, `sqrt` (= `power:1:0.5`) or `power:<coef>:<exponent>`.
fn parse_delta(line: usize, v: &str) -> Result<DeltaSchedule, ConfigError> {
    let v = v.trim();
    match v {
        "none" => return Ok(DeltaSchedule::None),
        "sqrt" => return Ok(DeltaSchedule::default()),
        _ => {}
    }
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 && parts[0] == "power" {
        let coef = parse_real(line, "delta", parts[1])?;
        let exponent = parse_real(line, "delta", parts[2])?;
        if coef > 0.0 && exponent > 0.0 {
            return Ok(DeltaSchedule::Power { coef, exponent });
        }
    }
    Err(err(
        line,
        "delta",
        format!("expected none, sqrt or power:<coef>:<exponent>, got `{v}`"),
    ))
}

/// Parses config text. Relative `output_dir` values are resolved against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut entries: Vec<(usize, &'static str, String)> = Vec::new();
    let mut section: Option<(&'static str, &'static [&'static str])> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(line, "section", format!("malformed header `{content}`")))?
                .trim();
            section = Some(
                *SECTIONS
                    .iter()
                    .find(|(s, _)| *s == name)
                    .ok_or_else(|| err(line, name, "unknown section"))?,
            );
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, content, "expected `key = value`"))?;
        let key = key.trim();
        let (sec_name, keys) =
            section.ok_or_else(|| err(line, key, "key outside of any section"))?;
        let key = *keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(line, key, format!("unknown key in [{sec_name}]")))?;
        if entries.iter().any(|(_, k, _)| *k == key) {
            return Err(err(line, key, "duplicate key"));
        }
        entries.push((line, key, value.trim().to_string()));
    }

    let get = |k: &str| {
        entries
            .iter()
            .find(|(_, key, _)| *key == k)
            .map(|(l, _, v)| (*l, v.as_str()))
    };
    let (line, kind) =
        get("experiment").ok_or_else(|| err(0, "experiment", "missing required key"))?;
    let kind: ExperimentKind = kind
        .parse()
        .map_err(|e: mosco_core::Error| err(line, "experiment", e.to_string()))?;
    let mut cfg = ExperimentConfig::new(kind);

    let seed = match get("seed") {
        Some((l, v)) => parse_uint::<u64>(l, "seed", v)?,
        None => 0,
    };
    cfg.seed = seed;
    for (line, key, value) in &entries {
        let (line, v) = (*line, value.as_str());
        match *key {
            "experiment" | "seed" | "output_dir" => {}
            "family" => {
                cfg.family = v
                    .parse()
                    .map_err(|e: mosco_core::Error| err(line, key, e.to_string()))?
            }
            "p" => cfg.p = parse_real(line, key, v)?,
            "n" => cfg.n = parse_uint(line, key, v)?,
            "eps_list" => cfg.eps_list = parse_list(line, key, v)?,
            "tau_list" => cfg.tau_list = parse_list(line, key, v)?,
            "mode" => {
                cfg.tau_mode = match v {
                    "to_neumann" => TauMode::ToNeumann,
                    "to_dirichlet" => TauMode::ToDirichlet,
                    other => {
                        return Err(err(
                            line,
                            key,
                            format!("expected to_neumann or to_dirichlet, got `{other}`"),
                        ))
                    }
                }
            }
            "T" => cfg.horizon = parse_real(line, key, v)?,
            "N" => cfg.steps = parse_uint(line, key, v)?,
            "lambda" => {
                cfg.lambda = match v {
                    "none" => None,
                    _ => Some(parse_real(line, key, v)?),
                }
            }
            "initial_data" => {
                cfg.initial_data =
                    Profile::parse(v, seed).map_err(|e| err(line, key, e.to_string()))?
            }
            "cells" => cfg.cells = parse_uint(line, key, v)?,
            "layers" => cfg.layers = parse_uint(line, key, v)?,
            "resolution_factor" => cfg.resolution_factor = parse_uint(line, key, v)?,
            "delta" => cfg.delta = parse_delta(line, v)?,
            "tol" => cfg.prox.tol = parse_real(line, key, v)?,
            "max_iter" => cfg.prox.max_iter = parse_uint(line, key, v)?,
            "method" => {
                cfg.prox.method = v
                    .parse()
                    .map_err(|e: mosco_core::Error| err(line, key, e.to_string()))?
            }
            "resolvent_lambda" => cfg.resolvent_lambda = parse_real(line, key, v)?,
            other => unreachable!("key `{other}` passed the section filter"),
        }
    }

    let output_dir = match get("output_dir") {
        Some((_, v)) => base_dir.join(v),
        None => base_dir.join("out").join(kind.name()),
    };

    cfg.validate().map_err(|e| {
        let field = field_of(&e.to_string());
        let line = get(field).map_or(0, |(l, _)| l);
        err(line, field, e.to_string())
    })?;
    Ok(RunConfig {
        experiment: cfg,
        output_dir,
        source_text: text.to_string(),
    })
}

/// Best-effort mapping from a validation message to the offending key.
fn field_of(message: &str) -> &'static str {
    let body = message.split_once(": ").map_or(message, |(_, b)| b);
    let keys = || SECTIONS.iter().flat_map(|(_, ks)| ks.iter().copied());
    keys()
        .find(|k| body.starts_with(&format!("{k} ")))
        .or_else(|| {
            keys()
                .filter(|k| k.len() > 1 && body.contains(k))
                .max_by_key(|k| k.len())
        })
        .unwrap_or("experiment")
}

pub fn read_config(path: &Path) -> Result<RunConfig, ReadError> {
    let text = std::fs::read_to_string(path).map_err(ReadError::Io)?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(ReadError::Config)
}

#[derive(Debug)]
pub enum ReadError {
    Io(std::io::Error),
    Config(ConfigError),
}

impl fmt::Display for ReadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReadError::Io(e) => write!(f, "cannot read config: {e}"),
            ReadError::Config(e) => write!(f, "config error: {e}"),
        }
    }
}

/// Resolved values as `key = value` lines, for the manifest.
pub fn canonical(cfg: &ExperimentConfig) -> String {
    let list = |l: &[f64]| {
        l.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        s.push_str(k);
        s.push_str(" = ");
        s.push_str(&v);
        s.push('\n');
    };
    kv("experiment", cfg.experiment.to_string());
    kv("family", cfg.family.to_string());
    kv("p", cfg.p.to_string());
    kv("n", cfg.n.to_string());
    kv("eps_list", list(&cfg.eps_list));
    kv("tau_list", list(&cfg.tau_list));
    kv(
        "mode",
        match cfg.tau_mode {
            TauMode::ToNeumann => "to_neumann".into(),
            TauMode::ToDirichlet => "to_dirichlet".into(),
        },
    );
    kv("T", cfg.horizon.to_string());
    kv("N", cfg.steps.to_string());
    kv(
        "lambda",
        cfg.lambda.map_or("none".into(), |l| l.to_string()),
    );
    kv("initial_data", cfg.initial_data.to_string());
    kv("seed", cfg.seed.to_string());
    kv("cells", cfg.cells.to_string());
    kv("layers", cfg.layers.to_string());
    kv("resolution_factor", cfg.resolution_factor.to_string());
    kv(
        "delta",
        match cfg.delta {
            DeltaSchedule::None => "none".into(),
            DeltaSchedule::Power { coef, exponent } => format!("power:{coef}:{exponent}"),
        },
    );
    kv("tol", cfg.prox.tol.to_string());
    kv("max_iter", cfg.prox.max_iter.to_string());
    kv("method", cfg.prox.method.to_string());
    kv("resolvent_lambda", cfg.resolvent_lambda.to_string());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAPH: &str = "\
# comment
[experiment]
experiment = graph-limit
n = 1
p = 2
eps_list = 1/8, 1/16, 1/32   ; trailing comment
T = 0.1
N = 64
initial_data = cosine
seed = 7

[prox]
tol = 1e-10
max_iter = 500

[output]
output_dir = results
";

    #[test]
    fn parses_a_complete_file() {
        let c = parse_config(GRAPH, Path::new("/tmp/base")).unwrap();
        assert_eq!(c.experiment.experiment, ExperimentKind::GraphLimit);
        assert_eq!(c.experiment.eps_list, vec![0.125, 0.0625, 0.03125]);
        assert_eq!(c.experiment.steps, 64);
        assert_eq!(c.experiment.seed, 7);
        assert_eq!(c.experiment.prox.max_iter, 500);
        assert_eq!(c.output_dir, Path::new("/tmp/base/results"));
    }

    #[test]
    fn errors_name_line_and_field() {
        let bad = GRAPH.replace("N = 64", "N = many");
        let e = parse_config(&bad, Path::new(".")).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (8, "N"));

        let bad = GRAPH.replace("T = 0.1", "horizon = 0.1");
        let e = parse_config(&bad, Path::new(".")).unwrap_err();
        assert_eq!((e.line, e.field.as_str()), (7, "horizon"));

        let bad = GRAPH.replace("eps_list = 1/8, 1/16, 1/32", "eps_list = []");
        let e = parse_config(&bad, Path::new(".")).unwrap_err();
        assert_eq!(e.field, "eps_list");
        assert_eq!(e.line, 6);

        let bad = GRAPH.replace("[prox]", "[solver]");
        assert_eq!(parse_config(&bad, Path::new(".")).unwrap_err().line, 12);
    }

    #[test]
    fn canonical_form_reparses_to_the_same_config() {
        let c = parse_config(GRAPH, Path::new(".")).unwrap();
        let text = canonical(&c.experiment);
        let mut rebuilt = String::from("[experiment]\n");
        let prox_keys = ["tol", "max_iter", "method", "resolvent_lambda"];
        let (exp, prox): (Vec<&str>, Vec<&str>) = text
            .lines()
            .partition(|l| !prox_keys.iter().any(|k| l.starts_with(&format!("{k} "))));
        for l in exp {
            rebuilt.push_str(l);
            rebuilt.push('\n');
        }
        rebuilt.push_str("[prox]\n");
        for l in prox {
            rebuilt.push_str(l);
            rebuilt.push('\n');
        }
        let again = parse_config(&rebuilt, Path::new(".")).unwrap();
        assert_eq!(again.experiment, c.experiment);
    }
}
