use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::generators::{CommandTransport, InstructionTemplates, DEFAULT_CONTEXT_TOKEN_CAP};
use crate::types::StrategyTag;
use crate::verifiers::{SparsityLevel, DEFAULT_JUDGE_TOKEN_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    SyntheticBitstring,
    EpisodicToy,
    ExternalAdapter,
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskFamily::SyntheticBitstring => "synthetic_bitstring",
            TaskFamily::EpisodicToy => "episodic_toy",
            TaskFamily::ExternalAdapter => "external_adapter",
        })
    }
}

/// Commands implementing each role for `external_adapter` experiments.
/// Each speaks JSON on stdin/stdout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalAdapters {
    /// JSONL file of task instances.
    pub tasks: PathBuf,
    pub generator: CommandTransport,
    pub scorer: CommandTransport,
    #[serde(default)]
    pub judge: Option<CommandTransport>,
    #[serde(default)]
    pub equivalence: Option<CommandTransport>,
    #[serde(default)]
    pub system_instruction: String,
    #[serde(default = "default_retry_attempts")]
    pub retry_attempts: u32,
}

fn default_retry_attempts() -> u32 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskParams {
    pub n_tasks: u32,
    /// Seed for building task instances; separate from the run seeds.
    pub task_seed: u64,
    pub length: usize,
    /// Bits by which the prior mode differs from the hidden target.
    pub prior_errors: usize,
    pub mu: f64,
    pub mu_directed: f64,
    pub horizon: usize,
    pub alphabet: Vec<String>,
    pub external: Option<ExternalAdapters>,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            n_tasks: 1,
            task_seed: 0,
            length: 16,
            prior_errors: 7,
            mu: 0.1,
            mu_directed: 0.02,
            horizon: 3,
            alphabet: vec!["left".into(), "right".into()],
            external: None,
        }
    }
}

/// Budget K for IAD-fb: a fixed count or `"n"` for one critique per
/// refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KSpec {
    Fixed(u32),
    Keyword(NKeyword),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NKeyword {
    #[serde(rename = "n")]
    N,
}

impl KSpec {
    pub fn resolve(self, n: u32) -> u32 {
        match self {
            KSpec::Fixed(k) => k.min(n),
            KSpec::Keyword(NKeyword::N) => n,
        }
    }
}

impl Default for KSpec {
    fn default() -> Self {
        KSpec::Fixed(0)
    }
}

/// One `[[strategies]]` entry. N, temperature, sparsity and noise come from
/// the grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyTemplate {
    pub strategy: StrategyTag,
    /// Distinguishes two templates with the same strategy.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub k: KSpec,
    #[serde(default = "default_true")]
    pub condition_on_worst: bool,
    #[serde(default = "default_context_cap")]
    pub context_token_cap: usize,
    #[serde(default = "default_judge_cap")]
    pub judge_token_cap: usize,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub templates: InstructionTemplates,
}

fn default_true() -> bool {
    true
}
fn default_context_cap() -> usize {
    DEFAULT_CONTEXT_TOKEN_CAP
}
fn default_judge_cap() -> usize {
    DEFAULT_JUDGE_TOKEN_CAP
}
fn default_top_p() -> f64 {
    1.0
}
fn default_max_tokens() -> u32 {
    4096
}

impl StrategyTemplate {
    pub fn new(strategy: StrategyTag) -> Self {
        StrategyTemplate {
            strategy,
            label: None,
            k: KSpec::default(),
            condition_on_worst: true,
            context_token_cap: DEFAULT_CONTEXT_TOKEN_CAP,
            judge_token_cap: DEFAULT_JUDGE_TOKEN_CAP,
            top_p: 1.0,
            max_tokens: 4096,
            templates: InstructionTemplates::default(),
        }
    }

    /// Name used in run ids and series labels.
    pub fn name(&self) -> String {
        match &self.label {
            Some(l) => format!("{}-{l}", self.strategy),
            None => self.strategy.to_string(),
        }
    }
}

fn seed_list<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Seeds {
        List(Vec<u64>),
        Range { start: u64, count: u64 },
    }
    Ok(match Seeds::deserialize(d)? {
        Seeds::List(v) => v,
        Seeds::Range { start, count } => (start..start.saturating_add(count)).collect(),
    })
}

fn default_temperature_grid() -> Vec<f64> {
    vec![0.6]
}
fn default_sparsity_grid() -> Vec<SparsityLevel> {
    vec![SparsityLevel::NS]
}
fn default_noise_grid() -> Vec<f64> {
    vec![0.0]
}
fn default_threshold() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub task_family: TaskFamily,
    #[serde(default)]
    pub task_params: TaskParams,
    pub strategies: Vec<StrategyTemplate>,
    /// A list, or `{ start = 0, count = 500 }`.
    #[serde(deserialize_with = "seed_list")]
    pub seeds: Vec<u64>,
    /// Sampling temperature; for synthetic tasks it is also the cold-start
    /// flip rate.
    #[serde(default = "default_temperature_grid")]
    pub temperature_grid: Vec<f64>,
    pub n_grid: Vec<u32>,
    #[serde(default = "default_sparsity_grid")]
    pub sparsity_grid: Vec<SparsityLevel>,
    #[serde(default = "default_noise_grid")]
    pub noise_grid: Vec<f64>,
    pub output_dir: PathBuf,
    /// Adapter role (`generator`, `scorer`, `judge`, `equivalence`) to the
    /// name of the environment variable holding its API key.
    #[serde(default)]
    pub adapter_env: BTreeMap<String, String>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_threshold")]
    pub correctness_threshold: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical JSON form, ignoring `workers`, which does
    /// not affect results.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("workers");
        }
        // serde_json maps are ordered by key, so this text is canonical
        let text = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        for (name, empty) in [
            ("seeds", self.seeds.is_empty()),
            ("temperature_grid", self.temperature_grid.is_empty()),
            ("n_grid", self.n_grid.is_empty()),
            ("sparsity_grid", self.sparsity_grid.is_empty()),
            ("noise_grid", self.noise_grid.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n == 0) {
            return bad(format!("n_grid entries must be positive, got {n}"));
        }
        if let Some(s) = self.noise_grid.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return bad(format!("noise_grid entries must be >= 0, got {s}"));
        }
        for t in &self.temperature_grid {
            let max = if self.task_family == TaskFamily::SyntheticBitstring { 1.0 } else { 2.0 };
            if !(t.is_finite() && (0.0..=max).contains(t)) {
                return bad(format!("temperature {t} outside [0, {max}] for {}", self.task_family));
            }
        }
        check_unique("seeds", &self.seeds)?;
        check_unique("n_grid", &self.n_grid)?;
        check_unique("sparsity_grid", &self.sparsity_grid)?;
        check_unique_f64("temperature_grid", &self.temperature_grid)?;
        check_unique_f64("noise_grid", &self.noise_grid)?;
        let names: Vec<String> = self.strategies.iter().map(|s| s.name()).collect();
        check_unique("strategies (add a `label` to tell them apart)", &names)?;
        if !(0.0..=1.0).contains(&self.correctness_threshold) {
            return bad(format!(
                "correctness_threshold must be in [0, 1], got {}",
                self.correctness_threshold
            ));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        for role in self.adapter_env.keys() {
            if !["generator", "scorer", "judge", "equivalence"].contains(&role.as_str()) {
                return bad(format!("adapter_env: unknown adapter role `{role}`"));
            }
        }
        self.validate_family()
    }

    fn validate_family(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let p = &self.task_params;
        if p.n_tasks == 0 {
            return bad("task_params.n_tasks must be positive".into());
        }
        let unsupported = |tag: StrategyTag| {
            self.strategies
                .iter()
                .any(|s| s.strategy == tag)
                .then_some(Error::NotSupportedForTaskFamily(tag))
        };
        match self.task_family {
            TaskFamily::SyntheticBitstring => {
                if p.length == 0 {
                    return bad("task_params.length must be positive".into());
                }
                if p.prior_errors > p.length {
                    return bad(format!(
                        "prior_errors ({}) exceeds length ({})",
                        p.prior_errors, p.length
                    ));
                }
                if !(0.0..=1.0).contains(&p.mu) || !(0.0..=p.mu).contains(&p.mu_directed) {
                    return bad("need 0 <= mu_directed <= mu <= 1".into());
                }
            }
            TaskFamily::EpisodicToy => {
                if p.horizon == 0 || p.alphabet.is_empty() {
                    return bad("episodic tasks need a positive horizon and a non-empty alphabet".into());
                }
                if let Some(e) = unsupported(StrategyTag::IadFb) {
                    return Err(e);
                }
            }
            TaskFamily::ExternalAdapter => {
                let Some(ext) = &p.external else {
                    return bad("external_adapter requires [task_params.external]".into());
                };
                if ext.judge.is_none() {
                    if let Some(e) = unsupported(StrategyTag::IadFb) {
                        return Err(e);
                    }
                }
                if ext.equivalence.is_none() {
                    if let Some(e) = unsupported(StrategyTag::BonSc) {
                        return Err(e);
                    }
                }
                if ext.retry_attempts == 0 {
                    return bad("retry_attempts must be positive".into());
                }
            }
        }
        Ok(())
    }
}

fn check_unique<T: Ord + fmt::Debug>(what: &str, xs: &[T]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for x in xs {
        if !seen.insert(x) {
            return Err(Error::InvalidConfig(format!("{what}: duplicate entry {x:?}")));
        }
    }
    Ok(())
}

fn check_unique_f64(what: &str, xs: &[f64]) -> Result<()> {
    let bits: Vec<u64> = xs.iter().map(|x| x.to_bits()).collect();
    check_unique(what, &bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
task_family = "synthetic_bitstring"
seeds = [0, 1, 2]
n_grid = [2, 4]
output_dir = "out"

[[strategies]]
strategy = "BON"

[[strategies]]
strategy = "IADFB"
k = "n"
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.task_params.length, 16);
        assert_eq!(c.task_params.prior_errors, 7);
        assert_eq!(c.sparsity_grid, vec![SparsityLevel::NS]);
        assert_eq!(c.strategies[1].k, KSpec::Keyword(NKeyword::N));
        assert_eq!(c.strategies[1].k.resolve(4), 4);
        assert_eq!(KSpec::Fixed(3).resolve(2), 2);
    }

    #[test]
    fn seeds_accept_a_range() {
        let text = MINIMAL.replace("seeds = [0, 1, 2]", "seeds = { start = 10, count = 3 }");
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap().seeds, vec![10, 11, 12]);
    }

    #[test]
    fn hash_ignores_workers_only() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.workers = Some(8);
        assert_eq!(a.hash(), b.hash());
        b.seeds.push(3);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            ("seeds = [0, 1, 2]", "seeds = []"),
            ("n_grid = [2, 4]", "n_grid = [0]"),
            ("n_grid = [2, 4]", "n_grid = [2, 2]"),
            ("output_dir = \"out\"", "output_dir = \"out\"\nnoise_grid = [-0.1]"),
            ("output_dir = \"out\"", "output_dir = \"out\"\ntemperature_grid = [1.5]"),
            ("output_dir = \"out\"", "output_dir = \"out\"\nbogus = 1"),
            ("strategy = \"BON\"", "strategy = \"NOPE\""),
            ("k = \"n\"", "k = \"all\""),
        ];
        for (from, to) in cases {
            let text = MINIMAL.replace(from, to);
            let parsed = ExperimentConfig::from_toml(&text).and_then(|c| c.validate());
            assert!(matches!(parsed, Err(Error::InvalidConfig(_))), "{to}");
        }
    }

    #[test]
    fn duplicate_strategies_need_labels() {
        let text = MINIMAL.replace("strategy = \"BON\"", "strategy = \"IADFB\"\nk = 1");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!(c.validate().is_err());
        let text = MINIMAL.replace("strategy = \"BON\"", "strategy = \"IADFB\"\nk = 1\nlabel = \"k1\"");
        ExperimentConfig::from_toml(&text).unwrap().validate().unwrap();
    }

    #[test]
    fn episodic_family_rejects_judge_feedback() {
        let text = MINIMAL.replace("synthetic_bitstring", "episodic_toy");
        let err = ExperimentConfig::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(matches!(err, Error::NotSupportedForTaskFamily(StrategyTag::IadFb)));
    }
}
