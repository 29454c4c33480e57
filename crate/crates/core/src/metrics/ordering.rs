use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mean_stderr, MetricsReport};
use crate::error::{Error, Result};
use crate::types::RunRecord;
use crate::verifiers::SparsityLevel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingVerdict {
    pub levels: Vec<LevelStat>,
    /// Fixed tolerance, or `None` for one standard error per comparison.
    pub tolerance: Option<f64>,
    pub holds: bool,
    pub violations: Vec<String>,
}

/// Checks that each level's mean does not exceed its predecessor's by more
/// than the tolerance. Without a fixed tolerance, each comparison allows
/// the larger of the two standard errors.
pub fn non_increasing(levels: Vec<LevelStat>, tolerance: Option<f64>) -> OrderingVerdict {
    let mut violations = Vec::new();
    for w in levels.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let tol = tolerance.unwrap_or(a.stderr.max(b.stderr));
        if b.mean > a.mean + tol {
            violations.push(format!(
                "{} ({:.4}) exceeds {} ({:.4}) by more than {tol:.4}",
                b.label, b.mean, a.label, a.mean
            ));
        }
    }
    OrderingVerdict {
        holds: violations.is_empty(),
        levels,
        tolerance,
        violations,
    }
}

/// NS >= LS >= HS >= ES for one series, across reports that differ only in
/// sparsity.
pub fn ablation_ordering(
    reports: &BTreeMap<SparsityLevel, MetricsReport>,
    series: &str,
    tolerance: Option<f64>,
) -> Result<OrderingVerdict> {
    let mut first: Option<&MetricsReport> = None;
    let mut levels = Vec::new();
    for level in SparsityLevel::ALL {
        let Some(report) = reports.get(&level) else {
            continue;
        };
        if let Some(f) = first {
            if f.seeds != report.seeds || f.n_tasks != report.n_tasks {
                return Err(Error::IncomparableReports(format!(
                    "{level} report covers different seeds or tasks"
                )));
            }
        }
        first.get_or_insert(report);
        let s = report.per_strategy.get(series).ok_or_else(|| {
            Error::IncomparableReports(format!("{level} report has no series `{series}`"))
        })?;
        levels.push(LevelStat {
            label: level.to_string(),
            mean: s.mean_final_score,
            stderr: s.stderr,
        });
    }
    if levels.len() < 2 {
        return Err(Error::IncomparableReports(
            "need reports for at least two sparsity levels".into(),
        ));
    }
    Ok(non_increasing(levels, tolerance))
}

/// Mean of `a − b` over runs paired by `(task_id, seed)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedGap {
    pub mean: f64,
    pub stderr: f64,
    pub pairs: usize,
}

pub fn paired_gap(a: &[RunRecord], b: &[RunRecord]) -> Result<PairedGap> {
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    if a.len() != b.len() {
        return Err(Error::IncomparableReports(format!(
            "{} runs paired against {}",
            a.len(),
            b.len()
        )));
    }
    let index: BTreeMap<(&str, u64), &RunRecord> =
        b.iter().map(|r| ((r.task_id.as_str(), r.seed), r)).collect();
    let diffs = a
        .iter()
        .map(|r| {
            let other = index.get(&(r.task_id.as_str(), r.seed)).ok_or_else(|| {
                Error::IncomparableReports(format!(
                    "no partner for task `{}` seed {}",
                    r.task_id, r.seed
                ))
            })?;
            Ok(r.final_score().unwrap_or(0.0) - other.final_score().unwrap_or(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&diffs);
    Ok(PairedGap {
        mean,
        stderr,
        pairs: diffs.len(),
    })
}
