//! Output layout `<out>/<hash>/<file>.csv` plus `report.json`, and replay of
//! a stamped report.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::experiments::{execute, Artifacts};

pub const TOOL: &str = "digitfreq";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_FILE: &str = "report.json";

/// Characters of the config hash used as the run directory name.
const DIR_HASH_LEN: usize = 16;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Applies a seed override to seeded experiments.
pub fn effective_config(mut cfg: RunConfig, seeds: Option<Vec<u64>>) -> RunConfig {
    if cfg.experiment.seeded() {
        cfg.seeds = Some(seeds.unwrap_or_else(|| cfg.seed_list()));
    } else {
        cfg.seeds = None;
    }
    cfg
}

fn report_json(cfg: &RunConfig, artifacts: &Artifacts) -> Result<Json, CliError> {
    let files: serde_json::Map<String, Json> = artifacts
        .files
        .iter()
        .map(|(name, bytes)| (name.clone(), Json::String(sha256_hex(bytes))))
        .collect();
    Ok(json!({
        "tool": TOOL,
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "config_hash": cfg.hash()?,
        "config": cfg.canonical()?,
        "seeds": cfg.seeds.clone().unwrap_or_default(),
        "files": files,
        "results": artifacts.results,
    }))
}

/// Executes a config and writes its artifacts; returns the report path.
pub fn run(cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<PathBuf, CliError> {
    let artifacts = with_threads(threads, || execute(cfg))??;
    let hash = cfg.hash()?;
    let dir = out.join(&hash[..DIR_HASH_LEN]);
    fs::create_dir_all(&dir)?;
    for (name, bytes) in &artifacts.files {
        fs::write(dir.join(name), bytes)?;
    }
    let mut text = serde_json::to_string_pretty(&report_json(cfg, &artifacts)?)
        .map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    let path = dir.join(REPORT_FILE);
    fs::write(&path, text)?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub files_checked: usize,
    /// Set when the report was written by another tool version.
    pub version_warning: Option<String>,
}

/// Re-executes the stamped config and byte-compares every CSV next to the
/// report with the fresh output.
pub fn replay(report: &Path, threads: Option<usize>) -> Result<ReplayOutcome, CliError> {
    let text = fs::read_to_string(report)?;
    let stamp: Json = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    let field = |k: &str| {
        stamp
            .get(k)
            .and_then(Json::as_str)
            .ok_or_else(|| CliError::Parse(format!("report lacks `{k}`")))
    };
    let version = field("version")?;
    let version_warning =
        (version != VERSION).then(|| format!("report written by version {version}, replaying with {VERSION}"));
    let cfg = RunConfig::parse(field("config")?)?;
    if cfg.hash()? != field("config_hash")? {
        return Err(CliError::Mismatch("config text does not match its stamped hash".into()));
    }
    let artifacts = with_threads(threads, || execute(&cfg))??;
    let dir = report.parent().unwrap_or(Path::new("."));
    let recorded: Vec<String> = stamp
        .get("files")
        .and_then(Json::as_object)
        .map(|m| m.keys().cloned().collect())
        .unwrap_or_default();
    for name in &recorded {
        if !artifacts.files.contains_key(name) {
            return Err(CliError::Mismatch(format!("{name} is recorded but not produced")));
        }
    }
    for (name, fresh) in &artifacts.files {
        let path = dir.join(name);
        let old = fs::read(&path).map_err(|e| CliError::Mismatch(format!("{}: {e}", path.display())))?;
        if let Some(msg) = first_difference(name, &old, fresh) {
            return Err(CliError::Mismatch(msg));
        }
    }
    Ok(ReplayOutcome {
        files_checked: artifacts.files.len(),
        version_warning,
    })
}

/// First differing row (1-based, header is row 1) of two CSV files.
pub fn first_difference(name: &str, recorded: &[u8], fresh: &[u8]) -> Option<String> {
    if recorded == fresh {
        return None;
    }
    let a: Vec<&[u8]> = recorded.split(|&b| b == b'\n').collect();
    let b: Vec<&[u8]> = fresh.split(|&b| b == b'\n').collect();
    let row = (0..a.len().max(b.len()))
        .find(|&i| a.get(i) != b.get(i))
        .unwrap_or(0);
    let show = |x: Option<&&[u8]>| x.map_or("<missing>".to_string(), |l| String::from_utf8_lossy(l).into_owned());
    Some(format!(
        "{name} row {}: recorded `{}`, replayed `{}`",
        row + 1,
        show(a.get(row)),
        show(b.get(row))
    ))
}
