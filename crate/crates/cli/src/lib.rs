//! Configuration-driven experiments on lattice Fourier multipliers.
//!
//! One invocation runs one command, described by a JSON config, and writes
//! `report.json` plus any CSV data into the output directory.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

pub use commands::{dispatch, Context, Outcome};
pub use config::{parse_config, Command, ConfigError, ExperimentConfig};
pub use error::CliError;

/// What the command line asked for, before the config is assembled.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub command: Option<String>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// `key=value` overrides; values are read as JSON, falling back to strings.
    pub set: Vec<String>,
}

pub struct Finished {
    pub config: ExperimentConfig,
    pub report_path: PathBuf,
    pub outcome: Outcome,
}

fn config_parse_error(e: serde_json::Error) -> CliError {
    ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
    .into()
}

/// Merges the config file, the positional command and flag overrides.
pub fn assemble_config(inv: &Invocation) -> Result<ExperimentConfig, CliError> {
    let mut doc: Map<String, Value> = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(config_parse_error)? {
                Value::Object(m) => m,
                _ => return Err(CliError::Config("config must be a JSON object".into())),
            }
        }
        None => Map::new(),
    };
    if let Some(cmd) = &inv.command {
        if Command::from_name(cmd).is_none() {
            return Err(CliError::Config(format!("unknown command `{cmd}`")));
        }
        match doc.get("command").and_then(Value::as_str) {
            Some(c) if c != cmd => {
                return Err(CliError::Config(format!("command `{cmd}` disagrees with config command `{c}`")));
            }
            _ => {
                doc.insert("command".into(), Value::String(cmd.clone()));
            }
        }
    }
    if !doc.contains_key("command") {
        return Err(CliError::Config("no command given on the command line or in the config".into()));
    }
    for kv in &inv.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {kv:?}")))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        doc.insert(k.trim().to_string(), value);
    }
    if let Some(seed) = inv.seed {
        doc.insert("seed".into(), json!(seed));
    }
    if let Some(out) = &inv.out {
        doc.insert("out".into(), json!(out.to_string_lossy()));
    }
    let text = serde_json::to_string(&Value::Object(doc)).expect("JSON value serializes");
    let mut cfg = parse_config(&text)?;
    if cfg.out.is_none() {
        cfg.out = Some("out".into());
    }
    Ok(cfg)
}

/// Runs the configured command and writes `report.json`.
pub fn run(cfg: ExperimentConfig, base: &Path) -> Result<Finished, CliError> {
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into()));
    commands::prepare_out(&out)?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let clock = Instant::now();
    let ctx = Context {
        out: out.clone(),
        base: base.to_path_buf(),
    };
    let outcome = dispatch(&cfg, &ctx)?;
    let report = json!({
        "command": cfg.command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "started_unix": started,
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        "passed": outcome.passed,
        "files": outcome.files.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "result": outcome.result,
    });
    let report_path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    lattice_multipliers::io::write_atomic(&report_path, text.as_bytes())?;
    if !outcome.passed {
        return Err(CliError::Failed(format!("{} reported failures; see {}", cfg.command, report_path.display())));
    }
    Ok(Finished {
        config: cfg,
        report_path,
        outcome,
    })
}

/// Two-column text table of the summary rows.
pub fn render_table(rows: &[(String, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k:<w$}  {v}\n")).collect()
}
