//! Run manifests, checkpoints and report files.
//!
//! A run directory holds `checkpoint.json` (the full search state, rewritten
//! after every generation), `history.jsonl` and `pareto.csv`. Every file is
//! written to a temporary sibling first and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvalError, Evaluator, ExternalEvaluator, SurrogateEvaluator};
use crate::evolution::{
    ConfigError, EvaluatorKind, GenerationRecord, Individual, Search, SearchConfig, SearchError,
};
use crate::objectives::{write_pareto_csv, ParetoRow};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const PARETO_FILE: &str = "pareto.csv";
/// Overrides the external evaluator command line.
pub const EVALUATOR_ENV: &str = "ESRN_EVALUATOR";

#[derive(Debug, Error)]
pub enum ConfigLoadError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint version {found} is not supported (expected {CHECKPOINT_VERSION})")]
    Version { found: u64 },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io { path: path.to_path_buf(), source }
}

/// Reads a TOML manifest whose keys mirror [`SearchConfig`]. Missing keys take
/// their defaults; unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<SearchConfig, ConfigLoadError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigLoadError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text).map_err(|source| ConfigLoadError::Parse { path: path.to_path_buf(), source })
}

pub fn parse_config(text: &str) -> Result<SearchConfig, toml::de::Error> {
    toml::from_str(text)
}

/// Applies [`EVALUATOR_ENV`] to the evaluator command, if set.
pub fn apply_env_overrides(config: &mut SearchConfig) {
    if let Ok(cmd) = std::env::var(EVALUATOR_ENV) {
        if !cmd.trim().is_empty() {
            config.evaluator_command = Some(cmd);
        }
    }
}

/// Instantiates the configured evaluator backend.
pub fn backend_for(config: &SearchConfig) -> Result<Box<dyn Evaluator>, EvalError> {
    match config.evaluator {
        EvaluatorKind::Surrogate => Ok(Box::new(SurrogateEvaluator::default())),
        EvaluatorKind::External => {
            let command: Vec<String> = config
                .evaluator_command
                .as_deref()
                .unwrap_or_default()
                .split_whitespace()
                .map(str::to_owned)
                .collect();
            let timeout = Duration::from_secs(config.eval_timeout_secs);
            Ok(Box::new(ExternalEvaluator::spawn(command, timeout)?))
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    version: u32,
    search: &'a Search,
}

#[derive(Deserialize)]
struct CheckpointIn {
    search: Search,
}

pub fn checkpoint_bytes(search: &Search) -> Vec<u8> {
    let mut bytes = serde_json::to_vec(&CheckpointOut { version: CHECKPOINT_VERSION, search })
        .expect("search state serializes");
    bytes.push(b'\n');
    bytes
}

pub fn save_checkpoint(dir: &Path, search: &Search) -> Result<(), CheckpointError> {
    let path = dir.join(CHECKPOINT_FILE);
    write_atomic(&path, &checkpoint_bytes(search)).map_err(io_error(&path))
}

pub fn load_checkpoint(dir: &Path) -> Result<Search, CheckpointError> {
    let path = dir.join(CHECKPOINT_FILE);
    let bytes = fs::read(&path).map_err(io_error(&path))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let found = value.get("version").and_then(|v| v.as_u64());
    match found {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => return Err(CheckpointError::Version { found: v }),
        None => return Err(CheckpointError::Corrupt("missing version".into())),
    }
    let cp: CheckpointIn =
        serde_json::from_value(value).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    cp.search.credit.check().map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    cp.search.config.validate().map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if cp.search.population.elitism.is_empty() {
        return Err(CheckpointError::Corrupt("empty elitism".into()));
    }
    Ok(cp.search)
}

/// One JSON object per generation record, newline terminated.
pub fn history_jsonl(history: &[GenerationRecord]) -> String {
    history
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

/// Distinct individuals of the elitism and current population.
pub fn archive(search: &Search) -> Vec<Individual> {
    let mut seen = std::collections::HashSet::new();
    search
        .population
        .elitism
        .iter()
        .chain(&search.population.individuals)
        .filter(|i| seen.insert(i.text()))
        .cloned()
        .collect()
}

pub fn pareto_rows(individuals: &[Individual]) -> Vec<ParetoRow> {
    individuals
        .iter()
        .map(|i| ParetoRow { genome: i.text(), objectives: i.objectives() })
        .collect()
}

pub fn pareto_csv(rows: &[ParetoRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_pareto_csv(rows, &mut buf).expect("writing to memory cannot fail");
    buf
}

/// Writes the history log, the Pareto export and the checkpoint.
pub fn write_run_files(dir: &Path, search: &Search) -> Result<(), CheckpointError> {
    let history = dir.join(HISTORY_FILE);
    write_atomic(&history, history_jsonl(&search.history).as_bytes()).map_err(io_error(&history))?;
    let pareto = dir.join(PARETO_FILE);
    write_atomic(&pareto, &pareto_csv(&pareto_rows(&archive(search)))).map_err(io_error(&pareto))?;
    save_checkpoint(dir, search)
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Steps `search` to completion, rewriting the run files after every
/// generation. `stop_after` ends early once that generation is reached,
/// leaving a resumable checkpoint.
pub fn run_to_completion(
    search: &mut Search,
    backend: &mut dyn Evaluator,
    dir: &Path,
    stop_after: Option<u32>,
) -> Result<(), RunError> {
    write_run_files(dir, search)?;
    while !search.is_finished() && stop_after.is_none_or(|g| search.generation() < g) {
        let record = search.step(backend)?;
        log::info!(
            "generation {}: best {:.4}, median {:.4}",
            record.gen,
            record.best,
            record.median
        );
        write_run_files(dir, search)?;
    }
    Ok(())
}
