//! Decoding strategies: single-turn, Best-of-N, Best-of-N with
//! self-consistency, IAD, and IAD with judge feedback.
//!
//! Every strategy takes a generator, a verifier and a budget of N generation
//! calls, and returns a [`RunRecord`]. Adapter failures at run time are
//! recorded in the record (as events, failed iterations, or a failed
//! status); only invalid configuration is returned as an error.

mod equivalence;
pub mod episodic;
mod self_judge;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use equivalence::{
    majority_choice, Equivalence, EquivalenceKey, ExactMatchEquivalence, FnEquivalence,
};
pub use self_judge::SelfJudge;

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::generators::{
    build_context, generate, ConditioningContext, Generator, InstructionTemplates, SamplingParams,
    TokenCaps, DEFAULT_CONTEXT_TOKEN_CAP,
};
use crate::rng::RunStreams;
use crate::types::{
    select_best, Candidate, ContextSummary, IterationState, Payload, RunRecord, RunStatus,
    StrategyTag, TaskInstance, Trajectory,
};
use crate::verifiers::{
    critique, DegradedScorer, Judge, NoiseSpec, ScoredResponse, SparsityLevel, Verifier,
    DEFAULT_JUDGE_TOKEN_CAP,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy_tag: StrategyTag,
    /// Generation budget N.
    pub n: u32,
    /// Judge budget K (IAD-fb only).
    #[serde(default)]
    pub k: u32,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default = "default_true")]
    pub condition_on_worst: bool,
    #[serde(default = "default_sparsity")]
    pub sparsity: SparsityLevel,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_context_cap")]
    pub context_token_cap: usize,
    #[serde(default = "default_judge_cap")]
    pub judge_token_cap: usize,
    #[serde(default)]
    pub templates: InstructionTemplates,
}

fn default_true() -> bool {
    true
}
fn default_sparsity() -> SparsityLevel {
    SparsityLevel::NS
}
fn default_context_cap() -> usize {
    DEFAULT_CONTEXT_TOKEN_CAP
}
fn default_judge_cap() -> usize {
    DEFAULT_JUDGE_TOKEN_CAP
}

impl StrategyConfig {
    pub fn new(strategy_tag: StrategyTag, n: u32) -> Self {
        StrategyConfig {
            strategy_tag,
            n,
            k: 0,
            sampling: SamplingParams::default(),
            condition_on_worst: true,
            sparsity: SparsityLevel::NS,
            noise: NoiseSpec::NONE,
            context_token_cap: DEFAULT_CONTEXT_TOKEN_CAP,
            judge_token_cap: DEFAULT_JUDGE_TOKEN_CAP,
            templates: InstructionTemplates::default(),
        }
    }

    pub fn with_k(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn with_sparsity(mut self, level: SparsityLevel) -> Self {
        self.sparsity = level;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise = NoiseSpec { sigma };
        self
    }

    pub fn caps(&self) -> TokenCaps {
        TokenCaps {
            context: self.context_token_cap,
            judge: self.judge_token_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 1 {
            return bad("n must be at least 1".into());
        }
        if self.strategy_tag == StrategyTag::SingleTurn && self.n != 1 {
            return bad(format!("single-turn requires n = 1, got {}", self.n));
        }
        if self.strategy_tag == StrategyTag::IadFb {
            if self.k > self.n {
                return bad(format!("k ({}) must not exceed n ({})", self.k, self.n));
            }
        } else if self.k != 0 {
            return bad(format!("k must be 0 for {}", self.strategy_tag));
        }
        if NoiseSpec::new(self.noise.sigma).is_none() {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise.sigma));
        }
        self.sampling.validate()
    }
}

/// Identity and randomness for one run.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub streams: RunStreams,
    pub record_wall_time: bool,
}

impl RunContext {
    /// Streams derived from `(seed, task_id, strategy_tag)`.
    pub fn new(
        run_id: impl Into<String>,
        config_hash: impl Into<String>,
        seed: u64,
        task_id: &str,
        tag: StrategyTag,
    ) -> Self {
        RunContext {
            run_id: run_id.into(),
            config_hash: config_hash.into(),
            seed,
            streams: RunStreams::derive(seed, task_id, tag),
            record_wall_time: true,
        }
    }

    /// Uses caller-supplied streams, e.g. to run two strategies on common
    /// random numbers.
    pub fn with_streams(run_id: impl Into<String>, seed: u64, streams: RunStreams) -> Self {
        RunContext {
            run_id: run_id.into(),
            config_hash: String::new(),
            seed,
            streams,
            record_wall_time: true,
        }
    }

    pub fn without_wall_time(mut self) -> Self {
        self.record_wall_time = false;
        self
    }
}

/// Adapters a strategy may need. Which are required depends on the tag.
#[derive(Clone, Copy)]
pub struct StrategyDeps<'a> {
    pub generator: &'a dyn Generator,
    pub verifier: &'a dyn Verifier,
    pub judge: Option<&'a dyn Judge>,
    pub equivalence: Option<&'a dyn Equivalence>,
}

impl<'a> StrategyDeps<'a> {
    pub fn new(generator: &'a dyn Generator, verifier: &'a dyn Verifier) -> Self {
        StrategyDeps {
            generator,
            verifier,
            judge: None,
            equivalence: None,
        }
    }

    pub fn with_judge(mut self, judge: &'a dyn Judge) -> Self {
        self.judge = Some(judge);
        self
    }

    pub fn with_equivalence(mut self, equivalence: &'a dyn Equivalence) -> Self {
        self.equivalence = Some(equivalence);
        self
    }
}

pub fn run_strategy(
    task: &TaskInstance,
    deps: StrategyDeps<'_>,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    match cfg.strategy_tag {
        StrategyTag::SingleTurn => single_turn(task, deps.generator, deps.verifier, cfg, run),
        StrategyTag::Bon => best_of_n(task, deps.generator, deps.verifier, cfg, run),
        StrategyTag::BonSc => {
            best_of_n_sc(task, deps.generator, deps.equivalence, deps.verifier, cfg, run)
        }
        StrategyTag::Iad => iad(task, deps.generator, deps.verifier, cfg, run),
        StrategyTag::IadFb => {
            let judge = deps
                .judge
                .ok_or(Error::NotSupportedForTaskFamily(StrategyTag::IadFb))?;
            iad_fb(task, deps.generator, deps.verifier, judge, cfg, run)
        }
    }
}

/// Mutable bookkeeping shared by all strategies.
struct RunState {
    run: RunContext,
    tag: StrategyTag,
    budget: Budget,
    candidates: Vec<Candidate>,
    contexts: Vec<ContextSummary>,
    events: Vec<String>,
    started: Instant,
}

impl RunState {
    fn new(run: RunContext, cfg: &StrategyConfig) -> Self {
        RunState {
            run,
            tag: cfg.strategy_tag,
            budget: Budget::new(cfg.n, cfg.k),
            candidates: Vec::new(),
            contexts: Vec::new(),
            events: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Generates and scores one response. `None` means the step failed and
    /// the reason was recorded.
    #[allow(clippy::too_many_arguments)]
    fn propose(
        &mut self,
        task: &TaskInstance,
        ctx: &ConditioningContext,
        gen: &dyn Generator,
        scorer: &DegradedScorer<'_>,
        params: &SamplingParams,
        iteration: u32,
        judge_calls: u32,
    ) -> std::result::Result<Candidate, String> {
        self.contexts.push(ctx.summary(iteration));
        let index = self.contexts.len() as u32 - 1;
        let response = generate(ctx, params, gen, &mut self.run.streams.gen, &mut self.budget)
            .map_err(|e| format!("generation {index} failed: {e}"))?;
        let scored = scorer
            .score(task, &response, &mut self.run.streams.noise)
            .map_err(|e| format!("scoring generation {index} failed: {e}"))?;
        Ok(self.candidate(response, scored, scorer, iteration, index, judge_calls))
    }

    fn candidate(
        &self,
        response: Payload,
        scored: ScoredResponse,
        scorer: &DegradedScorer<'_>,
        iteration: u32,
        index: u32,
        judge_calls: u32,
    ) -> Candidate {
        Candidate {
            response,
            score: scored.outcome.score,
            raw_score: scored.outcome.raw_score,
            true_score: scorer.verifier.is_exact().then_some(scored.exact_score),
            critique: scored.outcome.critique,
            iteration,
            index,
            strategy_tag: self.tag,
            gen_calls_used: 1,
            judge_calls_used: judge_calls + scored.outcome.cost_judge_calls,
            equivalence_key: None,
        }
    }

    fn finish(
        self,
        task: &TaskInstance,
        winner: Option<usize>,
        trajectory: Option<Trajectory>,
    ) -> RunRecord {
        let status = if winner.is_some() {
            RunStatus::Completed
        } else {
            RunStatus::Failed {
                reason: self
                    .events
                    .last()
                    .cloned()
                    .unwrap_or_else(|| "no candidate was produced".into()),
            }
        };
        RunRecord {
            run_id: self.run.run_id,
            config_hash: self.run.config_hash,
            seed: self.run.seed,
            task_id: task.task_id.clone(),
            strategy_tag: self.tag,
            candidates: self.candidates,
            winner,
            trajectory,
            budget: self.budget.spent(),
            wall_time_ms: if self.run.record_wall_time {
                self.started.elapsed().as_millis() as u64
            } else {
                0
            },
            status,
            contexts: self.contexts,
            events: self.events,
            episode: None,
            variant: None,
            extra: Default::default(),
        }
    }
}

fn scorer_for<'a>(v: &'a dyn Verifier, cfg: &StrategyConfig) -> DegradedScorer<'a> {
    DegradedScorer {
        verifier: v,
        sparsity: cfg.sparsity,
        noise: cfg.noise,
    }
}

/// N unconditioned draws; every context is a cold start.
fn independent_draws(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    state: &mut RunState,
) -> Result<Vec<Option<Candidate>>> {
    let scorer = scorer_for(v, cfg);
    let ctx = build_context(task, None, None, None, cfg.caps(), &cfg.templates)?;
    let mut out = Vec::with_capacity(cfg.n as usize);
    for _ in 0..cfg.n {
        match state.propose(task, &ctx, gen, &scorer, &cfg.sampling, 0, 0) {
            Ok(c) => out.push(Some(c)),
            Err(e) => {
                state.events.push(e);
                out.push(None);
            }
        }
    }
    Ok(out)
}

/// One generation and one scoring, no refinement.
pub fn single_turn(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    if cfg.strategy_tag != StrategyTag::SingleTurn {
        return Err(Error::InvalidConfig(format!(
            "single_turn called with a {} config",
            cfg.strategy_tag
        )));
    }
    cfg.validate()?;
    sample_and_select(task, gen, v, cfg, run)
}

/// N i.i.d. draws from the unconditioned generator; the highest (possibly
/// degraded) score wins, ties to the earliest draw.
pub fn best_of_n(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    if cfg.strategy_tag != StrategyTag::Bon {
        return Err(Error::InvalidConfig(format!(
            "best_of_n called with a {} config",
            cfg.strategy_tag
        )));
    }
    cfg.validate()?;
    sample_and_select(task, gen, v, cfg, run)
}

fn sample_and_select(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    let mut state = RunState::new(run, cfg);
    state.candidates = independent_draws(task, gen, v, cfg, &mut state)?
        .into_iter()
        .flatten()
        .collect();
    let winner = select_best(&state.candidates)?;
    Ok(state.finish(task, winner, None))
}

/// N draws bucketed by equivalence key; the earliest member of the largest
/// bucket wins. Scores are recorded for evaluation but never consulted.
pub fn best_of_n_sc(
    task: &TaskInstance,
    gen: &dyn Generator,
    equivalence: Option<&dyn Equivalence>,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    let equivalence = equivalence.ok_or(Error::NotSupportedForTaskFamily(StrategyTag::BonSc))?;
    if cfg.strategy_tag != StrategyTag::BonSc {
        return Err(Error::InvalidConfig(format!(
            "best_of_n_sc called with a {} config",
            cfg.strategy_tag
        )));
    }
    cfg.validate()?;
    let mut state = RunState::new(run, cfg);
    let mut candidates = Vec::new();
    for c in independent_draws(task, gen, v, cfg, &mut state)?.into_iter().flatten() {
        match equivalence.key(task, &c.response) {
            Ok(k) => candidates.push(Candidate {
                equivalence_key: Some(k.0),
                ..c
            }),
            Err(e) => state
                .events
                .push(format!("equivalence key for generation {} failed: {e}", c.index)),
        }
    }
    let keys: Vec<&Option<String>> = candidates.iter().map(|c| &c.equivalence_key).collect();
    let winner = majority_choice(&keys);
    state.candidates = candidates;
    Ok(state.finish(task, winner, None))
}

/// Iterative decoding: a cold-start draw, then N-1 draws conditioned on the
/// incumbent best and worst responses. A proposal replaces the best only on
/// strict improvement.
pub fn iad(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    if cfg.strategy_tag != StrategyTag::Iad {
        return Err(Error::InvalidConfig(format!(
            "iad called with a {} config",
            cfg.strategy_tag
        )));
    }
    cfg.validate()?;
    iterate(task, gen, v, None, cfg, run)
}

/// IAD where each of the first K refinement steps also carries a judge
/// critique of the incumbent. A judge failure downgrades that step to plain
/// IAD and is recorded.
pub fn iad_fb(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    judge: &dyn Judge,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    if cfg.strategy_tag != StrategyTag::IadFb {
        return Err(Error::InvalidConfig(format!(
            "iad_fb called with a {} config",
            cfg.strategy_tag
        )));
    }
    cfg.validate()?;
    iterate(task, gen, v, Some(judge), cfg, run)
}

fn iterate(
    task: &TaskInstance,
    gen: &dyn Generator,
    v: &dyn Verifier,
    judge: Option<&dyn Judge>,
    cfg: &StrategyConfig,
    run: RunContext,
) -> Result<RunRecord> {
    let scorer = scorer_for(v, cfg);
    let caps = cfg.caps();
    let mut state = RunState::new(run, cfg);
    let mut states: Vec<IterationState> = Vec::new();
    // indices into state.candidates
    let mut best: Option<usize> = None;
    let mut worst: Option<usize> = None;
    let mut refinements = 0u32;

    for t in 0..cfg.n {
        let mut fb: Option<String> = None;
        let mut downgraded = false;
        let mut judge_calls = 0;
        if let (Some(b), Some(judge)) = (best, judge) {
            refinements += 1;
            if refinements <= cfg.k {
                let w = worst.unwrap_or(b);
                match critique(
                    task,
                    &state.candidates[b],
                    &state.candidates[w],
                    judge,
                    &mut state.budget,
                    caps,
                ) {
                    Ok(text) => {
                        judge_calls = 1;
                        fb = Some(text);
                    }
                    Err(e) => {
                        downgraded = true;
                        state
                            .events
                            .push(format!("iteration {t}: judge downgraded to plain IAD: {e}"));
                    }
                }
            }
        }
        let ctx = build_context(
            task,
            best.map(|i| &state.candidates[i]),
            if cfg.condition_on_worst {
                worst.map(|i| &state.candidates[i])
            } else {
                None
            },
            fb.as_deref(),
            caps,
            &cfg.templates,
        )?;

        let outcome = state.propose(task, &ctx, gen, &scorer, &cfg.sampling, t, judge_calls);
        let (proposed, accepted, failure) = match outcome {
            Ok(c) => {
                let accepted = best.is_none_or(|b| c.score - state.candidates[b].score > 0.0);
                state.candidates.push(c);
                let i = state.candidates.len() - 1;
                if accepted {
                    best = Some(i);
                }
                if worst.is_none_or(|w| state.candidates[i].score < state.candidates[w].score) {
                    worst = Some(i);
                }
                (Some(state.candidates[i].clone()), accepted, None)
            }
            Err(e) => {
                state.events.push(e.clone());
                (None, false, Some(e))
            }
        };
        if let (Some(b), Some(w)) = (best, worst) {
            states.push(IterationState {
                t,
                proposed,
                best: state.candidates[b].clone(),
                worst: state.candidates[w].clone(),
                accepted,
                instruction: ctx.instruction.clone(),
                critique_in_context: ctx.critique.clone(),
                failure,
                judge_downgraded: downgraded,
            });
        }
    }

    let trajectory = best.map(|b| Trajectory {
        task_id: task.task_id.clone(),
        states,
        final_best: state.candidates[b].clone(),
    });
    Ok(state.finish(task, best, trajectory))
}
