//! Experiment runner: config loading, matrix expansion, parallel execution
//! into an append-only ledger, resume, and report emission.
//!
//! An output directory holds `ledger.jsonl`, `manifest.json` and
//! `reports/`. The ledger is the source of truth; the manifest is a
//! summary of it plus the hash of the config that produced it.

mod config;
mod external;
mod matrix;
mod tasks;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    ExperimentConfig, ExternalAdapters, KSpec, NKeyword, StrategyTemplate, TaskFamily, TaskParams,
};
pub use external::{CommandEquivalence, CommandJudge, CommandVerifier};
pub use matrix::{expand, Cell};
pub use tasks::{synthetic_task, SyntheticTask};

use crate::error::{Error, Result};
use crate::ledger::{read_ledger, LedgerWriter};
use crate::metrics::MetricsReport;
use crate::types::{RecordKey, RunRecord, StrategyTag};
use tasks::Family;

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORTS_DIR: &str = "reports";

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Pending,
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub task_id: String,
    pub strategy_tag: StrategyTag,
    pub state: CellState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub config_hash: String,
    pub ledger: PathBuf,
    pub total_runs: usize,
    /// Cells present in the ledger, failed or not.
    pub completed_runs: usize,
    pub failed_runs: usize,
    pub runs: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Write-then-rename, so readers never see a partial manifest.
    pub fn store(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides both the config and the default worker count.
    pub workers: Option<usize>,
    /// Expand and list the matrix without running anything.
    pub dry_run: bool,
    /// Glob over strategy tags, template names, task ids and run ids.
    pub filter: Option<String>,
    /// Overrides `output_dir` from the config.
    pub output_dir: Option<PathBuf>,
    /// Stop after appending this many records, as if killed.
    pub stop_after: Option<usize>,
    /// Skip fsync after each record.
    pub non_durable: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub total_runs: usize,
    pub selected_runs: usize,
    /// Records appended by this invocation.
    pub executed: usize,
    /// Cells already present in the ledger.
    pub skipped: usize,
    /// Failed records appended by this invocation, as `run_id task_id: reason`.
    pub failures: Vec<String>,
    pub output_dir: PathBuf,
    pub report_files: Vec<PathBuf>,
    /// The expanded matrix, filled only on a dry run.
    pub planned: Vec<Cell>,
    pub interrupted: bool,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_FAILURES
        }
    }
}

/// Parses and validates a config, returning it with its expanded matrix.
pub fn validate(config_path: &Path) -> Result<(ExperimentConfig, Vec<Cell>)> {
    let config = ExperimentConfig::load(config_path)?;
    config.validate()?;
    let family = Family::build(&config)?;
    let cells = expand(&config, &family.task_ids());
    check_unique_keys(&cells)?;
    Ok((config, cells))
}

fn check_unique_keys(cells: &[Cell]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for c in cells {
        if !seen.insert((&c.run_id, &c.task_id)) {
            return Err(Error::InvalidConfig(format!(
                "matrix cell {} / {} appears twice",
                c.run_id, c.task_id
            )));
        }
    }
    Ok(())
}

fn key_of(cell: &Cell) -> RecordKey {
    RecordKey {
        run_id: cell.run_id.clone(),
        task_id: cell.task_id.clone(),
        strategy_tag: cell.tag(),
    }
}

fn matches_filter(cell: &Cell, config: &ExperimentConfig, pattern: &glob::Pattern) -> bool {
    let template = config.strategies[cell.template].name();
    [cell.tag().as_str(), template.as_str(), cell.task_id.as_str(), cell.run_id.as_str()]
        .iter()
        .any(|s| pattern.matches(s))
}

/// Runs every matrix cell not yet in the ledger, then writes reports.
pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let (config, cells) = validate(config_path)?;
    let hash = config.hash();
    let out = opts.output_dir.clone().unwrap_or_else(|| config.output_dir.clone());

    let selected: Vec<&Cell> = match &opts.filter {
        None => cells.iter().collect(),
        Some(f) => {
            let pattern = glob::Pattern::new(f)
                .map_err(|e| Error::InvalidConfig(format!("bad filter `{f}`: {e}")))?;
            cells.iter().filter(|c| matches_filter(c, &config, &pattern)).collect()
        }
    };
    let mut summary = RunSummary {
        total_runs: cells.len(),
        selected_runs: selected.len(),
        executed: 0,
        skipped: 0,
        failures: vec![],
        output_dir: out.clone(),
        report_files: vec![],
        planned: vec![],
        interrupted: false,
    };
    if opts.dry_run {
        summary.planned = selected.into_iter().cloned().collect();
        return Ok(summary);
    }

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let manifest_path = out.join(MANIFEST_FILE);
    if manifest_path.exists() {
        let old = RunManifest::load(&manifest_path)?;
        if old.config_hash != hash {
            return Err(Error::ConfigChanged {
                expected: old.config_hash,
                found: hash,
            });
        }
    }
    let ledger_path = out.join(LEDGER_FILE);
    let mut writer = LedgerWriter::open(&ledger_path)?;
    if opts.non_durable {
        writer = writer.non_durable();
    }
    let todo: Vec<&Cell> = selected.into_iter().filter(|c| !writer.contains(&key_of(c))).collect();
    summary.skipped = summary.selected_runs - todo.len();
    let config_path = fs::canonicalize(config_path).map_err(|e| Error::io(config_path, e))?;
    write_manifest(&manifest_path, &config_path, &hash, &ledger_path, &cells)?;

    let family = Family::build(&config)?;
    let workers = opts
        .workers
        .or(config.workers)
        .unwrap_or_else(|| {
            if family.is_remote() {
                1
            } else {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            }
        })
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {workers} workers: {e}")))?;

    let stop = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, RunRecord)>();
    let write_result: Result<()> = std::thread::scope(|scope| {
        let todo = &todo;
        let family = &family;
        let hash = hash.as_str();
        let stop = &stop;
        scope.spawn(move || {
            pool.install(|| {
                todo.par_iter().enumerate().for_each_with(tx, |tx, (i, cell)| {
                    if stop.load(Ordering::Relaxed) {
                        return;
                    }
                    let record = family.execute(cell, hash, config.record_wall_time);
                    let _ = tx.send((i, record));
                });
            })
        });

        // reorder buffer: records are appended in matrix order regardless
        // of which worker finishes first
        let mut pending: BTreeMap<usize, RunRecord> = BTreeMap::new();
        let mut next = 0;
        for (i, record) in rx.iter() {
            if stop.load(Ordering::Relaxed) {
                continue;
            }
            pending.insert(i, record);
            while let Some(record) = pending.remove(&next) {
                if let Err(e) = writer.append(&record) {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                if let crate::types::RunStatus::Failed { reason } = &record.status {
                    log::warn!("run {} on {} failed: {reason}", record.run_id, record.task_id);
                    summary
                        .failures
                        .push(format!("{} {}: {reason}", record.run_id, record.task_id));
                }
                summary.executed += 1;
                next += 1;
                if opts.stop_after.is_some_and(|n| summary.executed >= n) {
                    stop.store(true, Ordering::Relaxed);
                    summary.interrupted = true;
                    break;
                }
            }
        }
        Ok(())
    });
    write_result?;

    write_manifest(&manifest_path, &config_path, &hash, &ledger_path, &cells)?;
    if !summary.interrupted {
        let report = emit_reports(&ledger_path, &out.join(REPORTS_DIR), config.correctness_threshold)?;
        summary.report_files = report.files;
    }
    Ok(summary)
}

fn write_manifest(
    path: &Path,
    config_path: &Path,
    hash: &str,
    ledger_path: &Path,
    cells: &[Cell],
) -> Result<RunManifest> {
    let contents = read_ledger(ledger_path)?;
    let states: BTreeMap<RecordKey, CellState> = contents
        .records
        .iter()
        .map(|r| {
            let state = if r.status.is_failed() {
                CellState::Failed
            } else {
                CellState::Completed
            };
            (r.key(), state)
        })
        .collect();
    let runs: Vec<ManifestEntry> = cells
        .iter()
        .map(|c| ManifestEntry {
            run_id: c.run_id.clone(),
            task_id: c.task_id.clone(),
            strategy_tag: c.tag(),
            state: states.get(&key_of(c)).copied().unwrap_or(CellState::Pending),
        })
        .collect();
    let manifest = RunManifest {
        config_path: config_path.to_path_buf(),
        config_hash: hash.to_string(),
        ledger: ledger_path.to_path_buf(),
        total_runs: cells.len(),
        completed_runs: runs.iter().filter(|r| r.state != CellState::Pending).count(),
        failed_runs: runs.iter().filter(|r| r.state == CellState::Failed).count(),
        runs,
    };
    manifest.store(path)?;
    Ok(manifest)
}

/// Continues the experiment a manifest belongs to. Refuses if the config
/// file changed since the manifest was written.
pub fn resume(manifest_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let manifest = RunManifest::load(manifest_path)?;
    let config = ExperimentConfig::load(&manifest.config_path)?;
    let found = config.hash();
    if found != manifest.config_hash {
        return Err(Error::ConfigChanged {
            expected: manifest.config_hash,
            found,
        });
    }
    let out = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let opts = RunOptions {
        output_dir: Some(out),
        ..opts.clone()
    };
    run_experiment(&manifest.config_path, &opts)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportOutcome {
    pub report: MetricsReport,
    pub files: Vec<PathBuf>,
    /// Unparseable ledger lines, skipped with a warning.
    pub corrupt_lines: usize,
}

impl ReportOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.corrupt_lines > 0 {
            EXIT_FAILURES
        } else {
            EXIT_OK
        }
    }
}

/// Curve CSVs and `summary.json` for a ledger.
pub fn emit_reports(ledger: &Path, out_dir: &Path, correctness_threshold: f64) -> Result<ReportOutcome> {
    let contents = read_ledger(ledger)?;
    for c in &contents.corrupt_lines {
        log::warn!("{}:{}: skipping corrupt line: {}", ledger.display(), c.line, c.message);
    }
    let report = MetricsReport::from_records(&contents.records, correctness_threshold)?;
    let files = report.write(out_dir)?;
    Ok(ReportOutcome {
        report,
        files,
        corrupt_lines: contents.corrupt_lines.len(),
    })
}

/// Exit code for an error from any entry point.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::NotSupportedForTaskFamily(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_FAILURES,
    }
}
