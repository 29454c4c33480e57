//! Append-only JSON-lines run ledger.
//!
//! Each record is serialized to a single line and written with one
//! `write_all` on a file opened in append mode. A line without its trailing
//! newline is a torn write: readers ignore it and [`LedgerWriter::open`]
//! truncates it before appending.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{RecordKey, RunRecord};

pub struct LedgerWriter {
    path: PathBuf,
    file: File,
    keys: HashSet<RecordKey>,
    durable: bool,
}

impl LedgerWriter {
    /// Opens (or creates) a ledger for appending. Existing complete records
    /// are indexed for duplicate detection.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut keys = HashSet::new();
        if path.exists() {
            let contents = read_ledger(&path)?;
            if let Some(bad) = contents.corrupt_lines.first() {
                return Err(Error::InvalidRecord(format!(
                    "{}: line {} is corrupt ({}); refusing to append",
                    path.display(),
                    bad.line,
                    bad.message
                )));
            }
            if contents.torn_tail {
                let f = OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                f.set_len(contents.complete_bytes)
                    .map_err(|e| Error::io(&path, e))?;
                log::warn!("{}: discarded torn trailing line", path.display());
            }
            keys.extend(contents.records.iter().map(RunRecord::key));
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(LedgerWriter {
            path,
            file,
            keys,
            durable: true,
        })
    }

    /// Skip `fsync` after each record. Lines are still written atomically.
    pub fn non_durable(mut self) -> Self {
        self.durable = false;
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &RecordKey) -> bool {
        self.keys.contains(key)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        record.validate()?;
        let key = record.key();
        if self.keys.contains(&key) {
            return Err(Error::DuplicateRecord {
                run_id: key.run_id,
                task_id: key.task_id,
                strategy_tag: key.strategy_tag,
            });
        }
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        if self.durable {
            self.file
                .sync_data()
                .map_err(|e| Error::io(&self.path, e))?;
        }
        self.keys.insert(key);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorruptLine {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct LedgerContents {
    pub records: Vec<RunRecord>,
    pub corrupt_lines: Vec<CorruptLine>,
    /// The file ended in a partial line (a write was interrupted).
    pub torn_tail: bool,
    complete_bytes: u64,
}

pub fn read_ledger(path: impl AsRef<Path>) -> Result<LedgerContents> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ledger(BufReader::new(f)).map_err(|e| Error::io(path, e))
}

pub fn parse_ledger(mut reader: impl BufRead) -> std::io::Result<LedgerContents> {
    let mut out = LedgerContents::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if buf.last() != Some(&b'\n') {
            out.torn_tail = true;
            break;
        }
        out.complete_bytes += n as u64;
        let text = match std::str::from_utf8(&buf[..n - 1]) {
            Ok(t) => t.trim_end_matches('\r'),
            Err(e) => {
                out.corrupt_lines.push(CorruptLine {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(text) {
            Ok(r) => out.records.push(r),
            Err(e) => out.corrupt_lines.push(CorruptLine {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Reads the whole ledger file as bytes; handy for determinism checks.
pub fn ledger_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let mut v = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut v))
        .map_err(|e| Error::io(path, e))?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{test_candidate, BudgetLedger, RunStatus, StrategyTag};

    fn record(run_id: &str, score: f64) -> RunRecord {
        let mut c = test_candidate(score, 0, 0);
        c.strategy_tag = StrategyTag::Bon;
        RunRecord {
            run_id: run_id.into(),
            config_hash: "abc".into(),
            seed: u64::MAX,
            task_id: "t1".into(),
            strategy_tag: StrategyTag::Bon,
            candidates: vec![c],
            winner: Some(0),
            trajectory: None,
            budget: BudgetLedger {
                n_gen_calls: 1,
                ..Default::default()
            },
            wall_time_ms: 0,
            status: RunStatus::Completed,
            contexts: vec![],
            events: vec![],
            episode: None,
            variant: None,
            extra: Default::default(),
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut w = LedgerWriter::open(&path).unwrap();
        let r = record("r1", 0.25);
        w.append(&r).unwrap();
        let back = read_ledger(&path).unwrap();
        assert_eq!(back.records, vec![r]);
        assert_eq!(ledger_bytes(&path).unwrap().iter().filter(|&&b| b == b'\n').count(), 1);
    }

    #[test]
    fn duplicate_rejected_across_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let r = record("r1", 0.25);
        {
            let mut w = LedgerWriter::open(&path).unwrap();
            w.append(&r).unwrap();
            assert!(matches!(w.append(&r), Err(Error::DuplicateRecord { .. })));
        }
        let mut w = LedgerWriter::open(&path).unwrap();
        assert!(matches!(w.append(&r), Err(Error::DuplicateRecord { .. })));
        assert_eq!(read_ledger(&path).unwrap().records.len(), 1);
    }

    #[test]
    fn invalid_score_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut w = LedgerWriter::open(&path).unwrap();
        assert!(matches!(w.append(&record("r1", 1.2)), Err(Error::InvalidScore(_))));
        assert!(ledger_bytes(&path).unwrap().is_empty());
    }

    #[test]
    fn torn_tail_is_invisible_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let r1 = record("r1", 0.5);
        {
            let mut w = LedgerWriter::open(&path).unwrap();
            w.append(&r1).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"run_id":"r2","config_"#).unwrap();
        drop(f);

        let c = read_ledger(&path).unwrap();
        assert!(c.torn_tail);
        assert_eq!(c.records, vec![r1.clone()]);

        let mut w = LedgerWriter::open(&path).unwrap();
        let r2 = record("r2", 0.75);
        w.append(&r2).unwrap();
        let c = read_ledger(&path).unwrap();
        assert!(!c.torn_tail);
        assert!(c.corrupt_lines.is_empty());
        assert_eq!(c.records, vec![r1, r2]);
    }

    #[test]
    fn unknown_fields_survive() {
        let r = record("r1", 0.5);
        let mut v = serde_json::to_value(&r).unwrap();
        v["annotator"] = serde_json::json!({"name": "x", "n": 3});
        let line = serde_json::to_string(&v).unwrap();
        let parsed: RunRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(parsed.extra["annotator"]["n"], 3);
        let again = serde_json::to_string(&parsed).unwrap();
        assert_eq!(
            serde_json::from_str::<serde_json::Value>(&again).unwrap(),
            v
        );
    }

    #[test]
    fn corrupt_line_reported() {
        let text = format!(
            "{}\nnot json\n",
            serde_json::to_string(&record("r1", 0.5)).unwrap()
        );
        let c = parse_ledger(text.as_bytes()).unwrap();
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.corrupt_lines.len(), 1);
        assert_eq!(c.corrupt_lines[0].line, 2);
    }
}
