//! Domain types shared by every strategy: payloads, tasks, scored candidates,
//! IAD trajectories, call budgets and the ledger row.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Fixed-length response of the synthetic family. Serialized as a string of
/// `0`/`1` characters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn hamming(&self, other: &BitString) -> usize {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Positions where `self` and `other` disagree, in ascending order.
    pub fn diff_positions(&self, other: &BitString) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter_map(|(i, (a, b))| (a != b).then_some(i))
            .collect()
    }

    pub fn flipped(&self, positions: &[usize]) -> BitString {
        let mut bits = self.0.clone();
        for &i in positions {
            bits[i] = !bits[i];
        }
        BitString(bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid bit character {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A prompt, response, or observation.
///
/// Tokens are whitespace-delimited units for text and single bits for
/// bitstrings.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    Bits(BitString),
}

impl Payload {
    pub fn text(s: impl Into<String>) -> Self {
        Payload::Text(s.into())
    }

    pub fn as_bits(&self) -> Option<&BitString> {
        match self {
            Payload::Bits(b) => Some(b),
            Payload::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Payload::Text(s) => Some(s),
            Payload::Bits(_) => None,
        }
    }

    pub fn token_count(&self) -> usize {
        match self {
            Payload::Text(s) => s.split_whitespace().count(),
            Payload::Bits(b) => b.len(),
        }
    }

    /// Prefix truncation to at most `cap` tokens. Text keeps its original
    /// spacing up to the end of the last retained token.
    pub fn truncate_tokens(&self, cap: usize) -> Payload {
        match self {
            Payload::Text(s) => Payload::Text(truncate_text_tokens(s, cap).to_string()),
            Payload::Bits(b) => Payload::Bits(BitString(b.0.iter().copied().take(cap).collect())),
        }
    }

    /// Canonical rendering used for equivalence digests and prompts.
    pub fn render(&self) -> String {
        match self {
            Payload::Text(s) => s.clone(),
            Payload::Bits(b) => b.to_string(),
        }
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub(crate) fn truncate_text_tokens(s: &str, cap: usize) -> &str {
    if cap == 0 {
        return "";
    }
    let mut seen = 0;
    let mut in_token = false;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if in_token {
                in_token = false;
                if seen == cap {
                    return &s[..i];
                }
            }
        } else if !in_token {
            in_token = true;
            seen += 1;
        }
    }
    s
}

/// One prompt `x` together with its optional hidden reference `y*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub task_id: String,
    pub input: Payload,
    #[serde(default)]
    pub episode_history: Vec<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_reference: Option<Payload>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl TaskInstance {
    pub fn new(task_id: impl Into<String>, input: Payload) -> Self {
        TaskInstance {
            task_id: task_id.into(),
            input,
            episode_history: Vec::new(),
            hidden_reference: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_reference(mut self, reference: Payload) -> Self {
        self.hidden_reference = Some(reference);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyTag {
    SingleTurn,
    #[serde(rename = "BON")]
    Bon,
    #[serde(rename = "BONSC")]
    BonSc,
    #[serde(rename = "IAD")]
    Iad,
    #[serde(rename = "IADFB")]
    IadFb,
}

impl StrategyTag {
    pub const ALL: [StrategyTag; 5] = [
        StrategyTag::SingleTurn,
        StrategyTag::Bon,
        StrategyTag::BonSc,
        StrategyTag::Iad,
        StrategyTag::IadFb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::SingleTurn => "SingleTurn",
            StrategyTag::Bon => "BON",
            StrategyTag::BonSc => "BONSC",
            StrategyTag::Iad => "IAD",
            StrategyTag::IadFb => "IADFB",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, StrategyTag::Iad | StrategyTag::IadFb)
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        StrategyTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy tag {s:?}"))
    }
}

/// A generated response with its verifier outcome and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub response: Payload,
    /// Normalized score in [0, 1], after any sparsity/noise degradation.
    pub score: f64,
    /// Score in the verifier's native units.
    pub raw_score: f64,
    /// Exact normalized score before degradation, when the verifier is exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<String>,
    pub iteration: u32,
    /// Generation order within the run; second tie-break key.
    pub index: u32,
    pub strategy_tag: StrategyTag,
    pub gen_calls_used: u32,
    pub judge_calls_used: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence_key: Option<String>,
}

impl Candidate {
    /// Score used for evaluation: the exact score when known, otherwise the
    /// (possibly degraded) selection score.
    pub fn eval_score(&self) -> f64 {
        self.true_score.unwrap_or(self.score)
    }

    pub fn validate(&self) -> Result<()> {
        check_score(self.score)?;
        if let Some(t) = self.true_score {
            check_score(t)?;
        }
        if !self.raw_score.is_finite() {
            return Err(Error::InvalidScore(self.raw_score));
        }
        if self.gen_calls_used < 1 {
            return Err(Error::InvalidRecord(
                "candidate must account for at least one generation call".into(),
            ));
        }
        if !self.strategy_tag.is_iterative() && self.iteration != 0 {
            return Err(Error::InvalidRecord(format!(
                "{} candidates must have iteration 0, found {}",
                self.strategy_tag, self.iteration
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_score(score: f64) -> Result<()> {
    if score.is_finite() && (0.0..=1.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::InvalidScore(score))
    }
}

/// Total order used for selection: `Less` means `a` is preferred.
///
/// Higher score first; exact ties go to the earlier candidate (lower
/// iteration, then lower generation index).
pub fn compare_candidates(a: &Candidate, b: &Candidate) -> Result<Ordering> {
    if !a.score.is_finite() {
        return Err(Error::InvalidScore(a.score));
    }
    if !b.score.is_finite() {
        return Err(Error::InvalidScore(b.score));
    }
    Ok(b.score
        .total_cmp(&a.score)
        .then(a.iteration.cmp(&b.iteration))
        .then(a.index.cmp(&b.index)))
}

/// Index of the preferred candidate under [`compare_candidates`].
pub fn select_best(candidates: &[Candidate]) -> Result<Option<usize>> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        best = match best {
            None => {
                compare_candidates(c, c)?;
                Some(i)
            }
            Some(j) if compare_candidates(c, &candidates[j])? == Ordering::Less => Some(i),
            keep => keep,
        };
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub t: u32,
    /// `None` when generation or scoring failed at this step.
    pub proposed: Option<Candidate>,
    pub best: Candidate,
    pub worst: Candidate,
    pub accepted: bool,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique_in_context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Critique was planned but the judge failed; the step ran without one.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub judge_downgraded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub states: Vec<IterationState>,
    pub final_best: Candidate,
}

impl Trajectory {
    pub fn best_scores(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.best.score).collect()
    }

    /// Exact score of the incumbent at each step.
    pub fn best_true_scores(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.best.eval_score()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev_best: Option<&Candidate> = None;
        for s in &self.states {
            s.best.validate()?;
            s.worst.validate()?;
            if let Some(p) = &s.proposed {
                p.validate()?;
                let improves = prev_best.is_none_or(|b| p.score - b.score > 0.0);
                if s.accepted != improves {
                    return Err(Error::InvalidRecord(format!(
                        "iteration {}: accepted flag disagrees with strict improvement",
                        s.t
                    )));
                }
            } else if s.accepted {
                return Err(Error::InvalidRecord(format!(
                    "iteration {} accepted without a proposal",
                    s.t
                )));
            }
            if let Some(b) = prev_best {
                if s.best.score < b.score {
                    return Err(Error::InvalidRecord(format!(
                        "iteration {}: best-so-far score decreased",
                        s.t
                    )));
                }
            }
            prev_best = Some(&s.best);
        }
        Ok(())
    }
}

/// Call and token counters for one run. `n_gen_calls` is the budget N,
/// `k_judge_calls` is K.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub n_gen_calls: u32,
    pub k_judge_calls: u32,
    pub gen_tokens: u64,
    pub judge_tokens: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed { reason: String },
}

impl RunStatus {
    pub fn is_failed(&self) -> bool {
        matches!(self, RunStatus::Failed { .. })
    }
}

/// Structural summary of one generation context, recorded so that
/// conditioning can be audited after the fact.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub iteration: u32,
    pub best_excerpt_tokens: Option<usize>,
    pub worst_excerpt_tokens: Option<usize>,
    pub critique_tokens: Option<usize>,
    pub history_len: usize,
}

impl ContextSummary {
    pub fn is_unconditioned(&self) -> bool {
        self.best_excerpt_tokens.is_none()
            && self.worst_excerpt_tokens.is_none()
            && self.critique_tokens.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: u32,
    pub actions: Vec<Payload>,
    pub final_reward: Option<f64>,
}

/// One ledger row. Unknown fields found on read are kept in `extra` and
/// written back unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub task_id: String,
    pub strategy_tag: StrategyTag,
    /// Matrix coordinates other than N that distinguish this run's series,
    /// e.g. `tau=0.05,sparsity=ES`. Absent when the experiment has one series
    /// per strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    pub budget: BudgetLedger,
    pub wall_time_ms: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<ContextSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episode: Option<EpisodeSummary>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            run_id: self.run_id.clone(),
            task_id: self.task_id.clone(),
            strategy_tag: self.strategy_tag,
        }
    }

    pub fn winner_candidate(&self) -> Option<&Candidate> {
        self.winner.and_then(|i| self.candidates.get(i))
    }

    /// Evaluation score of the selected response, if any.
    pub fn final_score(&self) -> Option<f64> {
        if let Some(ep) = &self.episode {
            return ep.final_reward;
        }
        self.winner_candidate().map(Candidate::eval_score)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.candidates {
            c.validate()?;
        }
        if let Some(w) = self.winner {
            if w >= self.candidates.len() {
                return Err(Error::InvalidRecord(format!(
                    "winner index {w} out of range for {} candidates",
                    self.candidates.len()
                )));
            }
        }
        if let Some(t) = &self.trajectory {
            t.validate()?;
        }
        if let Some(ep) = &self.episode {
            if let Some(r) = ep.final_reward {
                check_score(r)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub run_id: String,
    pub task_id: String,
    pub strategy_tag: StrategyTag,
}

#[cfg(test)]
pub(crate) use tests::cand as test_candidate;
