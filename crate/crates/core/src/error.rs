use std::path::PathBuf;

use crate::types::StrategyTag;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid score {0}: scores must be finite and lie in [0, 1]")]
    InvalidScore(f64),

    #[error("duplicate ledger record for run `{run_id}`, task `{task_id}`, strategy {strategy_tag}")]
    DuplicateRecord {
        run_id: String,
        task_id: String,
        strategy_tag: StrategyTag,
    },

    #[error("record violates an invariant: {0}")]
    InvalidRecord(String),

    #[error("task `{0}` has no hidden reference but the verifier is exact")]
    MissingReference(String),

    #[error("{kind} budget exhausted after {used} calls")]
    BudgetExceeded { kind: &'static str, used: u32 },

    #[error("judge unavailable: {0}")]
    JudgeUnavailable(String),

    #[error("generator adapter failed after {attempts} attempt(s): {message}")]
    AdapterFailure { attempts: u32, message: String },

    #[error("verifier failed: {0}")]
    VerifierFailure(String),

    #[error("invalid conditioning context: {0}")]
    InvalidContext(String),

    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),

    #[error("strategy {0} is not supported for this task family")]
    NotSupportedForTaskFamily(StrategyTag),

    #[error("k = {k} exceeds the {available} candidate(s) available for task #{task}")]
    InsufficientCandidates {
        k: usize,
        available: usize,
        task: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("reports are not comparable: {0}")]
    IncomparableReports(String),

    #[error("configuration changed since the manifest was written (expected {expected}, found {found})")]
    ConfigChanged { expected: String, found: String },

    #[error("episode failed: {0}")]
    EpisodeFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
