use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};

use rand::seq::index::sample;
use rand::Rng;

use super::config::{ExperimentConfig, TaskFamily};
use super::external::{CommandEquivalence, CommandJudge, CommandVerifier};
use super::matrix::Cell;
use crate::error::{Error, Result};
use crate::generators::{
    CommandTransport, RemoteGenerator, RetryPolicy, SyntheticGenerator, SyntheticModelSpec,
};
use crate::rng::task_rng;
use crate::strategies::episodic::{run_episodic, ChoiceGenerator, ScriptedEnv, StrategyPolicy};
use crate::strategies::{run_strategy, ExactMatchEquivalence, RunContext, StrategyDeps};
use crate::types::{BitString, BudgetLedger, Payload, RunRecord, RunStatus, TaskInstance};
use crate::verifiers::{ExactMatchVerifier, HammingVerifier, SyntheticDiffJudge};

pub struct SyntheticTask {
    pub task: TaskInstance,
    pub prior_mode: BitString,
}

/// Bitstring task: a uniformly random target, and a prior mode that
/// differs from it in exactly `prior_errors` random positions.
pub fn synthetic_task(task_seed: u64, task_id: &str, length: usize, prior_errors: usize) -> SyntheticTask {
    let mut rng = task_rng(task_seed, task_id);
    let target = BitString((0..length).map(|_| rng.random()).collect());
    let wrong: Vec<usize> = sample(&mut rng, length, prior_errors).into_vec();
    let prior_mode = target.flipped(&wrong);
    SyntheticTask {
        task: TaskInstance::new(task_id, Payload::text(format!("recover the hidden {length}-bit string")))
            .with_reference(Payload::Bits(target)),
        prior_mode,
    }
}

pub(crate) struct EpisodicTask {
    task: TaskInstance,
    optimal: Vec<String>,
}

pub(crate) struct External {
    tasks: Vec<TaskInstance>,
    generator: RemoteGenerator<CommandTransport>,
    verifier: CommandVerifier,
    judge: Option<CommandJudge>,
    equivalence: Option<CommandEquivalence>,
}

/// Task instances and adapters for one experiment.
pub(crate) enum Family {
    Synthetic {
        tasks: Vec<SyntheticTask>,
        mu: f64,
        mu_directed: f64,
    },
    Episodic {
        tasks: Vec<EpisodicTask>,
        alphabet: Vec<String>,
    },
    External(Box<External>),
}

fn with_key_env(mut t: CommandTransport, config: &ExperimentConfig, role: &str) -> CommandTransport {
    if let Some(var) = config.adapter_env.get(role) {
        t.endpoint.api_key_env = Some(var.clone());
    }
    t
}

impl Family {
    pub fn build(config: &ExperimentConfig) -> Result<Family> {
        let p = &config.task_params;
        let ids = (0..p.n_tasks).map(|i| format!("task-{i}"));
        Ok(match config.task_family {
            TaskFamily::SyntheticBitstring => Family::Synthetic {
                tasks: ids
                    .map(|id| synthetic_task(p.task_seed, &id, p.length, p.prior_errors))
                    .collect(),
                mu: p.mu,
                mu_directed: p.mu_directed,
            },
            TaskFamily::EpisodicToy => Family::Episodic {
                tasks: ids
                    .map(|id| {
                        let mut rng = task_rng(p.task_seed, &id);
                        let optimal = (0..p.horizon)
                            .map(|_| p.alphabet[rng.random_range(0..p.alphabet.len())].clone())
                            .collect();
                        EpisodicTask {
                            task: TaskInstance::new(id, Payload::text("reach the goal state")),
                            optimal,
                        }
                    })
                    .collect(),
                alphabet: p.alphabet.clone(),
            },
            TaskFamily::ExternalAdapter => {
                let ext = p
                    .external
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("missing [task_params.external]".into()))?;
                let retry = RetryPolicy {
                    attempts: ext.retry_attempts,
                    ..RetryPolicy::default()
                };
                Family::External(Box::new(External {
                    tasks: load_tasks(&ext.tasks)?,
                    generator: RemoteGenerator::new(with_key_env(ext.generator.clone(), config, "generator"))
                        .with_retry(retry)
                        .with_system_instruction(ext.system_instruction.clone()),
                    verifier: CommandVerifier {
                        transport: with_key_env(ext.scorer.clone(), config, "scorer"),
                        retry,
                    },
                    judge: ext.judge.clone().map(|t| CommandJudge {
                        transport: with_key_env(t, config, "judge"),
                        retry,
                    }),
                    equivalence: ext.equivalence.clone().map(|t| CommandEquivalence {
                        transport: with_key_env(t, config, "equivalence"),
                        retry,
                    }),
                }))
            }
        })
    }

    pub fn task_ids(&self) -> Vec<String> {
        match self {
            Family::Synthetic { tasks, .. } => tasks.iter().map(|t| t.task.task_id.clone()).collect(),
            Family::Episodic { tasks, .. } => tasks.iter().map(|t| t.task.task_id.clone()).collect(),
            Family::External(e) => e.tasks.iter().map(|t| t.task_id.clone()).collect(),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, Family::External(_))
    }

    /// Runs one cell. Failures become failed records rather than errors.
    pub fn execute(&self, cell: &Cell, config_hash: &str, record_wall_time: bool) -> RunRecord {
        let mut run = RunContext::new(
            cell.run_id.clone(),
            config_hash,
            cell.seed,
            &cell.task_id,
            cell.tag(),
        );
        run.record_wall_time = record_wall_time;
        let result = self.dispatch(cell, run);
        let mut record = result.unwrap_or_else(|e| RunRecord {
            run_id: cell.run_id.clone(),
            config_hash: config_hash.to_string(),
            seed: cell.seed,
            task_id: cell.task_id.clone(),
            strategy_tag: cell.tag(),
            variant: None,
            candidates: vec![],
            winner: None,
            trajectory: None,
            budget: BudgetLedger::default(),
            wall_time_ms: 0,
            status: RunStatus::Failed { reason: e.to_string() },
            contexts: vec![],
            events: vec![e.to_string()],
            episode: None,
            extra: Default::default(),
        });
        record.variant = cell.variant.clone();
        record
    }

    fn dispatch(&self, cell: &Cell, run: RunContext) -> Result<RunRecord> {
        let cfg = &cell.strategy;
        match self {
            Family::Synthetic { tasks, mu, mu_directed } => {
                let t = tasks
                    .iter()
                    .find(|t| t.task.task_id == cell.task_id)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown task {}", cell.task_id)))?;
                let gen = SyntheticGenerator::new(SyntheticModelSpec {
                    length: t.prior_mode.len(),
                    prior_mode: t.prior_mode.clone(),
                    tau: cell.temperature,
                    mu: *mu,
                    mu_directed: *mu_directed,
                })?;
                let deps = StrategyDeps::new(&gen, &HammingVerifier)
                    .with_judge(&SyntheticDiffJudge)
                    .with_equivalence(&ExactMatchEquivalence);
                run_strategy(&t.task, deps, cfg, run)
            }
            Family::Episodic { tasks, alphabet } => {
                let t = tasks
                    .iter()
                    .find(|t| t.task.task_id == cell.task_id)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown task {}", cell.task_id)))?;
                cfg.validate()?;
                let gen = ChoiceGenerator {
                    options: alphabet.clone(),
                };
                let mut policy = StrategyPolicy {
                    deps: StrategyDeps::new(&gen, &ExactMatchVerifier)
                        .with_equivalence(&ExactMatchEquivalence),
                    cfg: cfg.clone(),
                    seed: cell.seed,
                };
                let mut env = ScriptedEnv::new(t.optimal.clone());
                Ok(run_episodic(&t.task, &mut policy, &mut env, run))
            }
            Family::External(e) => {
                let task = e
                    .tasks
                    .iter()
                    .find(|t| t.task_id == cell.task_id)
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown task {}", cell.task_id)))?;
                let mut deps = StrategyDeps::new(&e.generator, &e.verifier);
                if let Some(j) = &e.judge {
                    deps = deps.with_judge(j);
                }
                if let Some(q) = &e.equivalence {
                    deps = deps.with_equivalence(q);
                }
                run_strategy(task, deps, cfg, run)
            }
        }
    }
}

fn load_tasks(path: &std::path::Path) -> Result<Vec<TaskInstance>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tasks = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let task: TaskInstance = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidConfig(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        if !seen.insert(task.task_id.clone()) {
            return Err(Error::InvalidConfig(format!("duplicate task id {}", task.task_id)));
        }
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(Error::InvalidConfig(format!("{} has no tasks", path.display())));
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_prior_has_the_requested_distance() {
        for i in 0..20 {
            let t = synthetic_task(3, &format!("task-{i}"), 16, 7);
            let target = t.task.hidden_reference.as_ref().unwrap().as_bits().unwrap();
            assert_eq!(target.hamming(&t.prior_mode), 7);
        }
        let a = synthetic_task(3, "task-0", 16, 7);
        let b = synthetic_task(3, "task-0", 16, 7);
        assert_eq!(a.prior_mode, b.prior_mode);
    }
}
