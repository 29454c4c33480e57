//! Aggregate evaluation over ledger records: Pass@K, Majority@K, score
//! versus generation calls, ablation orderings, and the policy-gap bound.
//!
//! Everything here is a pure function of its input records.

mod bound;
mod ordering;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use bound::{gap_bound_check, gap_bound_check_exact, GapBound};
pub use ordering::{
    ablation_ordering, non_increasing, paired_gap, LevelStat, OrderingVerdict, PairedGap,
};

use crate::error::{Error, Result};
use crate::strategies::{majority_choice, EquivalenceKey};
use crate::types::{RunRecord, StrategyTag};

pub const PASS_AT_K_ESTIMATOR: &str = "empirical: any correct among the first k candidates";

fn check_k<T>(tasks: &[Vec<T>], k: usize) -> Result<()> {
    if tasks.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if let Some((task, c)) = tasks.iter().enumerate().find(|(_, c)| c.len() < k) {
        return Err(Error::InsufficientCandidates {
            k,
            available: c.len(),
            task,
        });
    }
    Ok(())
}

/// Fraction of tasks with at least one correct flag among their first `k`.
pub fn pass_at_k(tasks: &[Vec<bool>], k: usize) -> Result<f64> {
    check_k(tasks, k)?;
    let hits = tasks.iter().filter(|c| c[..k].iter().any(|&x| x)).count();
    Ok(hits as f64 / tasks.len() as f64)
}

/// Fraction of tasks whose largest key bucket among the first `k`
/// candidates is correct. Bucket ties go to the earliest bucket.
pub fn majority_at_k<K: PartialEq>(tasks: &[Vec<(K, bool)>], k: usize) -> Result<f64> {
    check_k(tasks, k)?;
    let hits = tasks
        .iter()
        .filter(|c| {
            let keys: Vec<&K> = c[..k].iter().map(|(key, _)| key).collect();
            majority_choice(&keys).is_some_and(|i| c[i].1)
        })
        .count();
    Ok(hits as f64 / tasks.len() as f64)
}

/// Sample mean and standard error of the mean (n − 1 denominator; zero for
/// a single value).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub calls: u32,
    pub value: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Series name of a record: the strategy tag, plus its variant if any.
pub fn series_label(record: &RunRecord) -> String {
    match &record.variant {
        Some(v) => format!("{}[{v}]", record.strategy_tag),
        None => record.strategy_tag.to_string(),
    }
}

fn run_score(r: &RunRecord) -> f64 {
    // a run that produced nothing scores zero
    r.final_score().unwrap_or(0.0)
}

/// Mean final score per series at each generation-call count present.
pub fn accuracy_vs_calls(records: &[RunRecord]) -> Result<BTreeMap<String, Vec<CurvePoint>>> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut groups: BTreeMap<String, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    for r in records {
        groups
            .entry(series_label(r))
            .or_default()
            .entry(r.budget.n_gen_calls)
            .or_default()
            .push(run_score(r));
    }
    Ok(groups
        .into_iter()
        .map(|(series, by_calls)| {
            let curve = by_calls
                .into_iter()
                .map(|(calls, scores)| {
                    let (value, stderr) = mean_stderr(&scores);
                    CurvePoint {
                        calls,
                        value,
                        stderr,
                        runs: scores.len(),
                    }
                })
                .collect();
            (series, curve)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub strategy_tag: StrategyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Runs at the series' largest call budget, which the next three
    /// fields summarize.
    pub runs: usize,
    pub mean_final_score: f64,
    pub stderr: f64,
    /// Fraction of those runs whose final score reaches the threshold.
    pub accuracy: f64,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_strategy: BTreeMap<String, SeriesSummary>,
    /// Per series, k -> Pass@k over runs at the largest call budget.
    pub pass_at_k: BTreeMap<String, BTreeMap<u32, f64>>,
    pub majority_at_k: BTreeMap<String, BTreeMap<u32, f64>>,
    pub n_tasks: usize,
    pub seeds: Vec<u64>,
    pub correctness_threshold: f64,
    pub pass_at_k_estimator: String,
    /// Records that failed and were scored as zero.
    pub failed_runs: usize,
}

impl MetricsReport {
    pub fn empty(correctness_threshold: f64) -> Self {
        MetricsReport {
            per_strategy: BTreeMap::new(),
            pass_at_k: BTreeMap::new(),
            majority_at_k: BTreeMap::new(),
            n_tasks: 0,
            seeds: Vec::new(),
            correctness_threshold,
            pass_at_k_estimator: PASS_AT_K_ESTIMATOR.into(),
            failed_runs: 0,
        }
    }

    /// A candidate or run is correct when its score reaches `threshold`.
    pub fn from_records(records: &[RunRecord], threshold: f64) -> Result<Self> {
        let curves = accuracy_vs_calls(records)?;
        let mut report = MetricsReport::empty(threshold);
        report.n_tasks = records
            .iter()
            .map(|r| r.task_id.as_str())
            .collect::<BTreeSet<_>>()
            .len();
        report.seeds = records
            .iter()
            .map(|r| r.seed)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        report.failed_runs = records.iter().filter(|r| r.status.is_failed()).count();

        for (series, curve) in curves {
            let in_series: Vec<&RunRecord> =
                records.iter().filter(|r| series_label(r) == series).collect();
            let top = curve.last().map(|p| p.calls).unwrap_or(0);
            let final_runs: Vec<&RunRecord> = in_series
                .iter()
                .copied()
                .filter(|r| r.budget.n_gen_calls == top)
                .collect();
            let scores: Vec<f64> = final_runs.iter().map(|r| run_score(r)).collect();
            let (mean, stderr) = mean_stderr(&scores);
            let accuracy =
                scores.iter().filter(|&&s| s >= threshold).count() as f64 / scores.len() as f64;

            let (pass, majority) = candidate_metrics(&final_runs, threshold)?;
            if !pass.is_empty() {
                report.pass_at_k.insert(series.clone(), pass);
                report.majority_at_k.insert(series.clone(), majority);
            }
            report.per_strategy.insert(
                series,
                SeriesSummary {
                    strategy_tag: final_runs[0].strategy_tag,
                    variant: final_runs[0].variant.clone(),
                    runs: scores.len(),
                    mean_final_score: mean,
                    stderr,
                    accuracy,
                    curve,
                },
            );
        }
        Ok(report)
    }

    /// One `curve_<series>.csv` per series plus `summary.json`. Returns the
    /// paths written, in order.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut written = Vec::new();
        for (series, s) in &self.per_strategy {
            let path = out_dir.join(format!("curve_{}.csv", file_stem(series)));
            let mut w = csv::Writer::from_path(&path)
                .map_err(|e| Error::io(&path, e.into()))?;
            let io = |e: csv::Error| Error::io(&path, e.into());
            w.write_record(["strategy", "calls", "value", "stderr"]).map_err(io)?;
            for p in &s.curve {
                w.write_record([
                    series.clone(),
                    p.calls.to_string(),
                    p.value.to_string(),
                    p.stderr.to_string(),
                ])
                .map_err(io)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        let path = out_dir.join("summary.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(written)
    }
}

/// Pass@k and Majority@k for k = 1..=min candidates, skipping episodic
/// runs whose candidates are per-step actions.
fn candidate_metrics(
    runs: &[&RunRecord],
    threshold: f64,
) -> Result<(BTreeMap<u32, f64>, BTreeMap<u32, f64>)> {
    let runs: Vec<&&RunRecord> = runs
        .iter()
        .filter(|r| r.episode.is_none() && !r.candidates.is_empty())
        .collect();
    let mut pass = BTreeMap::new();
    let mut majority = BTreeMap::new();
    let Some(max_k) = runs.iter().map(|r| r.candidates.len()).min() else {
        return Ok((pass, majority));
    };
    let flags: Vec<Vec<bool>> = runs
        .iter()
        .map(|r| r.candidates.iter().map(|c| c.eval_score() >= threshold).collect())
        .collect();
    let keyed: Vec<Vec<(EquivalenceKey, bool)>> = runs
        .iter()
        .map(|r| {
            r.candidates
                .iter()
                .map(|c| {
                    let key = match &c.equivalence_key {
                        Some(k) => EquivalenceKey(k.clone()),
                        None => EquivalenceKey::digest(c.response.render().trim()),
                    };
                    (key, c.eval_score() >= threshold)
                })
                .collect()
        })
        .collect();
    for k in 1..=max_k {
        pass.insert(k as u32, pass_at_k(&flags, k)?);
        majority.insert(k as u32, majority_at_k(&keyed, k)?);
    }
    Ok((pass, majority))
}

fn file_stem(series: &str) -> String {
    series
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.=".contains(c) { c } else { '_' })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

#[cfg(test)]
mod tests;
