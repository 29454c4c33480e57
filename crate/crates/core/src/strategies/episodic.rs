//! Multi-step episodes with a sparse final reward.
//!
//! At every environment step a policy picks the next action with the whole
//! interaction history in its context. The environment's reward arrives
//! once, when the episode ends.

use rand::seq::IndexedRandom;

use super::{run_strategy, RunContext, StrategyConfig, StrategyDeps};
use crate::error::{Error, Result};
use crate::generators::{ConditioningContext, Generation, Generator, SamplingParams};
use crate::rng::{RunStreams, StreamRng};
use crate::types::{
    BudgetLedger, Candidate, EpisodeSummary, Payload, RunRecord, RunStatus, StrategyTag,
    TaskInstance,
};

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Payload,
    pub done: bool,
    /// Present only on the terminal step.
    pub final_reward: Option<f64>,
}

pub trait EpisodicEnv {
    fn reset(&mut self) -> Result<Payload>;

    fn step(&mut self, action: &Payload) -> Result<StepOutcome>;

    /// Step-level reference for verifiers that grade individual actions.
    fn step_reference(&self) -> Option<Payload> {
        None
    }

    /// Hard stop for environments that never signal `done`.
    fn max_steps(&self) -> u32 {
        64
    }
}

/// Picks one action for the current step.
pub trait ActionPolicy {
    fn tag(&self) -> StrategyTag;

    fn select(&mut self, step_task: &TaskInstance, step: u32) -> Result<(Candidate, BudgetLedger)>;
}

/// Runs one episode. The record holds the chosen action of every step as
/// its candidates and the terminal reward in `episode.final_reward`.
pub fn run_episodic(
    task: &TaskInstance,
    policy: &mut dyn ActionPolicy,
    env: &mut dyn EpisodicEnv,
    run: RunContext,
) -> RunRecord {
    let started = std::time::Instant::now();
    let mut budget = BudgetLedger::default();
    let mut candidates = Vec::new();
    let mut actions = Vec::new();
    let mut events = Vec::new();

    let result: Result<Option<f64>> = (|| {
        let mut observation = env.reset()?;
        let mut history = task.episode_history.clone();
        for step in 0..env.max_steps() {
            let step_task = TaskInstance {
                task_id: task.task_id.clone(),
                input: observation.clone(),
                episode_history: history.clone(),
                hidden_reference: env.step_reference(),
                metadata: task.metadata.clone(),
            };
            let (choice, spent) = policy.select(&step_task, step)?;
            budget.n_gen_calls += spent.n_gen_calls;
            budget.k_judge_calls += spent.k_judge_calls;
            budget.gen_tokens += spent.gen_tokens;
            budget.judge_tokens += spent.judge_tokens;
            let action = choice.response.clone();
            candidates.push(Candidate {
                iteration: if choice.strategy_tag.is_iterative() {
                    choice.iteration
                } else {
                    0
                },
                index: step,
                ..choice
            });
            actions.push(action.clone());
            let out = env.step(&action)?;
            history.push(observation);
            history.push(action);
            observation = out.observation;
            if out.done {
                return Ok(out.final_reward);
            }
        }
        Err(Error::EpisodeFailed(format!(
            "episode did not finish within {} steps",
            env.max_steps()
        )))
    })();

    let (status, final_reward) = match result {
        Ok(r) => (RunStatus::Completed, r),
        Err(e) => {
            events.push(e.to_string());
            (
                RunStatus::Failed {
                    reason: e.to_string(),
                },
                None,
            )
        }
    };
    RunRecord {
        run_id: run.run_id,
        config_hash: run.config_hash,
        seed: run.seed,
        task_id: task.task_id.clone(),
        strategy_tag: policy.tag(),
        winner: None,
        trajectory: None,
        budget,
        wall_time_ms: if run.record_wall_time {
            started.elapsed().as_millis() as u64
        } else {
            0
        },
        status,
        contexts: Vec::new(),
        events,
        episode: Some(EpisodeSummary {
            steps: actions.len() as u32,
            actions,
            final_reward,
        }),
        candidates,
        variant: None,
        extra: Default::default(),
    }
}

/// Runs a full strategy at every step and plays its winner.
pub struct StrategyPolicy<'a> {
    pub deps: StrategyDeps<'a>,
    pub cfg: StrategyConfig,
    pub seed: u64,
}

impl ActionPolicy for StrategyPolicy<'_> {
    fn tag(&self) -> StrategyTag {
        self.cfg.strategy_tag
    }

    fn select(&mut self, step_task: &TaskInstance, step: u32) -> Result<(Candidate, BudgetLedger)> {
        let stream_key = format!("{}#step{step}", step_task.task_id);
        let run = RunContext::with_streams(
            stream_key.clone(),
            self.seed,
            RunStreams::derive(self.seed, &stream_key, self.cfg.strategy_tag),
        )
        .without_wall_time();
        let record = run_strategy(step_task, self.deps, &self.cfg, run)?;
        let choice = record.winner_candidate().cloned().ok_or_else(|| {
            Error::EpisodeFailed(format!("step {step}: strategy produced no action"))
        })?;
        Ok((choice, record.budget))
    }
}

/// Plays a fixed action sequence.
pub struct ScriptedPolicy {
    pub actions: Vec<Payload>,
}

impl ActionPolicy for ScriptedPolicy {
    fn tag(&self) -> StrategyTag {
        StrategyTag::SingleTurn
    }

    fn select(&mut self, _: &TaskInstance, step: u32) -> Result<(Candidate, BudgetLedger)> {
        let action = self
            .actions
            .get(step as usize)
            .cloned()
            .ok_or_else(|| Error::EpisodeFailed(format!("script has no action for step {step}")))?;
        Ok((
            Candidate {
                response: action,
                score: 0.0,
                raw_score: 0.0,
                true_score: None,
                critique: None,
                iteration: 0,
                index: step,
                strategy_tag: StrategyTag::SingleTurn,
                gen_calls_used: 1,
                judge_calls_used: 0,
                equivalence_key: None,
            },
            BudgetLedger {
                n_gen_calls: 1,
                ..Default::default()
            },
        ))
    }
}

/// Toy environment: `horizon` steps, each expecting one action from an
/// alphabet. Reward 1 at the end iff every action matched the script.
#[derive(Clone, Debug)]
pub struct ScriptedEnv {
    pub optimal: Vec<String>,
    step: usize,
    all_correct: bool,
}

impl ScriptedEnv {
    pub fn new(optimal: Vec<String>) -> Self {
        ScriptedEnv {
            optimal,
            step: 0,
            all_correct: true,
        }
    }

    fn observation(&self) -> Payload {
        Payload::text(format!("step {} of {}", self.step + 1, self.optimal.len()))
    }
}

impl EpisodicEnv for ScriptedEnv {
    fn reset(&mut self) -> Result<Payload> {
        if self.optimal.is_empty() {
            return Err(Error::EpisodeFailed("scripted env has no steps".into()));
        }
        self.step = 0;
        self.all_correct = true;
        Ok(self.observation())
    }

    fn step(&mut self, action: &Payload) -> Result<StepOutcome> {
        let expected = self
            .optimal
            .get(self.step)
            .ok_or_else(|| Error::EpisodeFailed("step after episode end".into()))?;
        self.all_correct &= action.render().trim() == expected;
        self.step += 1;
        let done = self.step == self.optimal.len();
        Ok(StepOutcome {
            observation: self.observation(),
            done,
            final_reward: done.then_some(if self.all_correct { 1.0 } else { 0.0 }),
        })
    }

    fn step_reference(&self) -> Option<Payload> {
        self.optimal.get(self.step).map(|s| Payload::text(s.as_str()))
    }

    fn max_steps(&self) -> u32 {
        self.optimal.len() as u32
    }
}

/// Toy action generator: uniform over a fixed alphabet. When conditioned,
/// it keeps a perfect incumbent and otherwise avoids actions already seen
/// as best or worst.
#[derive(Clone, Debug)]
pub struct ChoiceGenerator {
    pub options: Vec<String>,
}

impl Generator for ChoiceGenerator {
    fn generate(
        &self,
        ctx: &ConditioningContext,
        _params: &SamplingParams,
        rng: &mut StreamRng,
    ) -> Result<Generation> {
        if let (Some(best), Some(score)) = (&ctx.best_excerpt, ctx.best_score) {
            if score >= 1.0 {
                return Ok(Generation {
                    payload: best.clone(),
                    tokens: best.token_count() as u64,
                });
            }
        }
        let tried: Vec<String> = [&ctx.best_excerpt, &ctx.worst_excerpt]
            .into_iter()
            .flatten()
            .map(|p| p.render())
            .collect();
        let fresh: Vec<&String> = self.options.iter().filter(|o| !tried.contains(o)).collect();
        let pool: Vec<&String> = if fresh.is_empty() {
            self.options.iter().collect()
        } else {
            fresh
        };
        let pick = pool
            .choose(rng)
            .ok_or_else(|| Error::AdapterFailure {
                attempts: 1,
                message: "empty action alphabet".into(),
            })?;
        Ok(Generation {
            payload: Payload::text(pick.as_str()),
            tokens: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifiers::ExactMatchVerifier;

    fn task() -> TaskInstance {
        TaskInstance::new("shop-1", Payload::text("buy the red mug"))
    }

    fn script(actions: &[&str]) -> Vec<String> {
        actions.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn one_step_env_invokes_policy_once() {
        struct Counting(u32);
        impl ActionPolicy for Counting {
            fn tag(&self) -> StrategyTag {
                StrategyTag::SingleTurn
            }
            fn select(&mut self, t: &TaskInstance, s: u32) -> Result<(Candidate, BudgetLedger)> {
                self.0 += 1;
                ScriptedPolicy {
                    actions: vec![Payload::text("anything")],
                }
                .select(t, s)
            }
        }
        let mut env = ScriptedEnv::new(script(&["click"]));
        let mut p = Counting(0);
        let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", 0, "shop-1", StrategyTag::SingleTurn));
        assert_eq!(p.0, 1);
        assert_eq!(r.episode.unwrap().steps, 1);
        assert_eq!(r.status, RunStatus::Completed);
    }

    #[test]
    fn oracle_policy_succeeds() {
        let optimal = script(&["search", "click", "buy"]);
        let mut env = ScriptedEnv::new(optimal.clone());
        let mut p = ScriptedPolicy {
            actions: optimal.iter().map(|s| Payload::text(s.as_str())).collect(),
        };
        let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", 0, "shop-1", StrategyTag::SingleTurn));
        assert_eq!(r.final_score(), Some(1.0));
        assert_eq!(r.budget.n_gen_calls, 3);
        r.validate().unwrap();
    }

    #[test]
    fn history_grows_with_each_step() {
        struct Recorder(Vec<usize>);
        impl ActionPolicy for Recorder {
            fn tag(&self) -> StrategyTag {
                StrategyTag::SingleTurn
            }
            fn select(&mut self, t: &TaskInstance, s: u32) -> Result<(Candidate, BudgetLedger)> {
                self.0.push(t.episode_history.len());
                ScriptedPolicy {
                    actions: vec![Payload::text("a"); 3],
                }
                .select(t, s)
            }
        }
        let mut env = ScriptedEnv::new(script(&["a", "b", "c"]));
        let mut p = Recorder(vec![]);
        let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", 0, "shop-1", StrategyTag::SingleTurn));
        assert_eq!(p.0, vec![0, 2, 4]);
        assert_eq!(r.final_score(), Some(0.0));
    }

    #[test]
    fn env_failure_marks_record_failed() {
        let mut env = ScriptedEnv::new(vec![]);
        let mut p = ScriptedPolicy { actions: vec![] };
        let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", 0, "shop-1", StrategyTag::SingleTurn));
        assert!(r.status.is_failed());
        assert_eq!(r.final_score(), None);
    }

    #[test]
    fn best_of_n_with_step_verifier_finds_the_script() {
        // with 3 options and N = 12 draws per step, a miss needs 12 wrong
        // draws in a row at some step: probability 3 * (2/3)^12 ~ 0.023
        let optimal = script(&["a", "b", "c"]);
        let gen = ChoiceGenerator {
            options: script(&["a", "b", "c"]),
        };
        let v = ExactMatchVerifier;
        let mut wins = 0;
        for seed in 0..50 {
            let mut env = ScriptedEnv::new(optimal.clone());
            let mut p = StrategyPolicy {
                deps: StrategyDeps::new(&gen, &v),
                cfg: StrategyConfig::new(StrategyTag::Bon, 12),
                seed,
            };
            let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", seed, "shop-1", StrategyTag::Bon));
            assert_eq!(r.budget.n_gen_calls, 36);
            if r.final_score() == Some(1.0) {
                wins += 1;
            }
        }
        assert!(wins >= 45, "wins = {wins}");
    }

    #[test]
    fn iad_avoids_repeating_mistakes() {
        // two options: after one wrong draw, the conditioned draw must be
        // the other option, so IAD with n = 2 always solves every step
        let optimal = script(&["x", "y", "x"]);
        let gen = ChoiceGenerator {
            options: script(&["x", "y"]),
        };
        let v = ExactMatchVerifier;
        for seed in 0..20 {
            let mut env = ScriptedEnv::new(optimal.clone());
            let mut p = StrategyPolicy {
                deps: StrategyDeps::new(&gen, &v),
                cfg: StrategyConfig::new(StrategyTag::Iad, 2),
                seed,
            };
            let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", seed, "shop-1", StrategyTag::Iad));
            assert_eq!(r.final_score(), Some(1.0));
        }
    }

    #[test]
    fn random_policy_matches_enumeration() {
        // uniform over 2 actions for 3 steps: success probability 1/8
        let optimal = script(&["l", "r", "r"]);
        let gen = ChoiceGenerator {
            options: script(&["l", "r"]),
        };
        let v = ExactMatchVerifier;
        let runs = 1000;
        let mut total = 0.0;
        for seed in 0..runs {
            let mut env = ScriptedEnv::new(optimal.clone());
            let mut p = StrategyPolicy {
                deps: StrategyDeps::new(&gen, &v),
                cfg: StrategyConfig::new(StrategyTag::SingleTurn, 1),
                seed,
            };
            let r = run_episodic(&task(), &mut p, &mut env, RunContext::new("r", "h", seed, "shop-1", StrategyTag::SingleTurn));
            total += r.final_score().unwrap();
        }
        let mean = total / runs as f64;
        assert!((mean - 0.125).abs() < 0.03, "mean = {mean}");
    }
}
