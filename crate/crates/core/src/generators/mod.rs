//! The response-producing side: conditioning contexts, the generator
//! adapter contract, and the synthetic bitstring model.

mod remote;
mod synthetic;

use serde::{Deserialize, Serialize};

pub use remote::{
    CommandTransport, EndpointConfig, GenRequest, GenResponse, RemoteGenerator, RetryPolicy, TokenUsage,
    Transport, TransportError,
};
pub use synthetic::{synthetic_sample, SyntheticGenerator, SyntheticModelSpec};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{truncate_text_tokens, Candidate, ContextSummary, Payload, TaskInstance};

pub const DEFAULT_CONTEXT_TOKEN_CAP: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCaps {
    /// Per-excerpt cap for best/worst responses.
    pub context: usize,
    /// Cap on critique text.
    pub judge: usize,
}

impl Default for TokenCaps {
    fn default() -> Self {
        TokenCaps {
            context: DEFAULT_CONTEXT_TOKEN_CAP,
            judge: crate::verifiers::DEFAULT_JUDGE_TOKEN_CAP,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.6,
            top_p: 1.0,
            max_tokens: 4096,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidConfig("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Instruction strings `p_t`. The refinement template may reference
/// `{best_excerpt}`, `{worst_excerpt}`, `{best_score}` and `{critique}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstructionTemplates {
    pub initial: String,
    pub refine: String,
}

impl Default for InstructionTemplates {
    fn default() -> Self {
        InstructionTemplates {
            initial: "Solve the task.".into(),
            refine: "Write a response that beats the best attempt so far and does not repeat \
                     the mistakes of the worst attempt."
                .into(),
        }
    }
}

impl InstructionTemplates {
    fn render_refine(
        &self,
        best: Option<&Payload>,
        worst: Option<&Payload>,
        best_score: Option<f64>,
        critique: Option<&str>,
    ) -> String {
        let show = |p: Option<&Payload>| p.map(Payload::render).unwrap_or_default();
        self.refine
            .replace("{best_excerpt}", &show(best))
            .replace("{worst_excerpt}", &show(worst))
            .replace(
                "{best_score}",
                &best_score.map(|s| format!("{s:.4}")).unwrap_or_default(),
            )
            .replace("{critique}", critique.unwrap_or(""))
    }
}

/// Everything a generator is conditioned on for one call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditioningContext {
    pub task_input: Payload,
    pub best_excerpt: Option<Payload>,
    pub worst_excerpt: Option<Payload>,
    /// Score of the incumbent best response.
    pub best_score: Option<f64>,
    pub instruction: String,
    pub critique: Option<String>,
    pub episode_history: Vec<Payload>,
}

impl ConditioningContext {
    pub fn summary(&self, iteration: u32) -> ContextSummary {
        ContextSummary {
            iteration,
            best_excerpt_tokens: self.best_excerpt.as_ref().map(Payload::token_count),
            worst_excerpt_tokens: self.worst_excerpt.as_ref().map(Payload::token_count),
            critique_tokens: self
                .critique
                .as_deref()
                .map(|c| Payload::text(c).token_count()),
            history_len: self.episode_history.len(),
        }
    }
}

/// Builds the generation context from the incumbent pair. Excerpts are
/// prefix truncations to `caps.context`; the critique is cut to
/// `caps.judge`. With no incumbent this is a cold-start context.
pub fn build_context(
    task: &TaskInstance,
    best: Option<&Candidate>,
    worst: Option<&Candidate>,
    critique: Option<&str>,
    caps: TokenCaps,
    templates: &InstructionTemplates,
) -> Result<ConditioningContext> {
    if worst.is_some() && best.is_none() {
        return Err(Error::InvalidContext(
            "a worst response requires a best response".into(),
        ));
    }
    let Some(best) = best else {
        return Ok(ConditioningContext {
            task_input: task.input.clone(),
            best_excerpt: None,
            worst_excerpt: None,
            best_score: None,
            instruction: templates.initial.clone(),
            critique: None,
            episode_history: task.episode_history.clone(),
        });
    };
    let best_excerpt = best.response.truncate_tokens(caps.context);
    let worst_excerpt = worst.map(|w| w.response.truncate_tokens(caps.context));
    let critique = critique
        .map(|c| truncate_text_tokens(c, caps.judge).to_string())
        .filter(|c| !c.trim().is_empty());
    let instruction = templates.render_refine(
        Some(&best_excerpt),
        worst_excerpt.as_ref(),
        Some(best.score),
        critique.as_deref(),
    );
    Ok(ConditioningContext {
        task_input: task.input.clone(),
        best_excerpt: Some(best_excerpt),
        worst_excerpt,
        best_score: Some(best.score),
        instruction,
        critique,
        episode_history: task.episode_history.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub payload: Payload,
    pub tokens: u64,
}

pub trait Generator: Send + Sync {
    fn generate(
        &self,
        ctx: &ConditioningContext,
        params: &SamplingParams,
        rng: &mut StreamRng,
    ) -> Result<Generation>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn generate(
        &self,
        ctx: &ConditioningContext,
        params: &SamplingParams,
        rng: &mut StreamRng,
    ) -> Result<Generation> {
        (**self).generate(ctx, params, rng)
    }
}

/// One budgeted generation call. The call is charged even when the adapter
/// fails, so a run never exceeds its configured N.
pub fn generate(
    ctx: &ConditioningContext,
    params: &SamplingParams,
    gen: &dyn Generator,
    rng: &mut StreamRng,
    budget: &mut Budget,
) -> Result<Payload> {
    budget.check_gen()?;
    match gen.generate(ctx, params, rng) {
        Ok(g) => {
            budget.record_gen(g.tokens);
            Ok(g.payload)
        }
        Err(e) => {
            budget.record_gen(0);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::StrategyTag;

    fn text_candidate(words: usize, score: f64) -> Candidate {
        let body = (0..words).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        Candidate {
            response: Payload::text(body),
            score,
            raw_score: score,
            true_score: None,
            critique: None,
            iteration: 0,
            index: 0,
            strategy_tag: StrategyTag::Iad,
            gen_calls_used: 1,
            judge_calls_used: 0,
            equivalence_key: None,
        }
    }

    fn task() -> TaskInstance {
        TaskInstance::new("t", Payload::text("draw the page"))
    }

    #[test]
    fn cold_start_has_only_input_and_instruction() {
        let tpl = InstructionTemplates::default();
        let ctx = build_context(&task(), None, None, None, TokenCaps::default(), &tpl).unwrap();
        assert_eq!(ctx.task_input, Payload::text("draw the page"));
        assert!(ctx.best_excerpt.is_none() && ctx.worst_excerpt.is_none());
        assert!(ctx.best_score.is_none() && ctx.critique.is_none());
        assert_eq!(ctx.instruction, tpl.initial);
        assert!(ctx.summary(0).is_unconditioned());
    }

    #[test]
    fn short_best_is_kept_whole() {
        let best = text_candidate(10, 0.4);
        let ctx = build_context(
            &task(),
            Some(&best),
            None,
            None,
            TokenCaps::default(),
            &InstructionTemplates::default(),
        )
        .unwrap();
        assert_eq!(ctx.best_excerpt.as_ref(), Some(&best.response));
        assert_eq!(ctx.best_score, Some(0.4));
    }

    #[test]
    fn long_best_is_cut_to_cap() {
        let best = text_candidate(1000, 0.4);
        let worst = text_candidate(400, 0.1);
        let ctx = build_context(
            &task(),
            Some(&best),
            Some(&worst),
            None,
            TokenCaps::default(),
            &InstructionTemplates::default(),
        )
        .unwrap();
        let excerpt = ctx.best_excerpt.unwrap();
        assert_eq!(excerpt.token_count(), 300);
        assert_eq!(excerpt, text_candidate(300, 0.0).response);
        assert_eq!(ctx.worst_excerpt.unwrap().token_count(), 300);
    }

    #[test]
    fn worst_without_best_is_rejected() {
        let w = text_candidate(3, 0.1);
        assert!(matches!(
            build_context(
                &task(),
                None,
                Some(&w),
                None,
                TokenCaps::default(),
                &InstructionTemplates::default()
            ),
            Err(Error::InvalidContext(_))
        ));
    }

    #[test]
    fn template_placeholders_are_filled() {
        let tpl = InstructionTemplates {
            initial: "go".into(),
            refine: "beat {best_score}: {best_excerpt} not {worst_excerpt} ({critique})".into(),
        };
        let best = text_candidate(2, 0.5);
        let worst = text_candidate(1, 0.25);
        let ctx = build_context(
            &task(),
            Some(&best),
            Some(&worst),
            Some("fix w1"),
            TokenCaps::default(),
            &tpl,
        )
        .unwrap();
        assert_eq!(ctx.instruction, "beat 0.5000: w0 w1 not w0 (fix w1)");
    }

    #[test]
    fn critique_is_capped() {
        let caps = TokenCaps { context: 300, judge: 2 };
        let best = text_candidate(2, 0.5);
        let ctx = build_context(
            &task(),
            Some(&best),
            None,
            Some("a b c d"),
            caps,
            &InstructionTemplates::default(),
        )
        .unwrap();
        assert_eq!(ctx.critique.as_deref(), Some("a b"));
    }

    #[test]
    fn generate_charges_budget_and_refuses_when_spent() {
        struct Echo;
        impl Generator for Echo {
            fn generate(
                &self,
                ctx: &ConditioningContext,
                _: &SamplingParams,
                _: &mut StreamRng,
            ) -> Result<Generation> {
                Ok(Generation {
                    payload: ctx.task_input.clone(),
                    tokens: 3,
                })
            }
        }
        let ctx = build_context(
            &task(),
            None,
            None,
            None,
            TokenCaps::default(),
            &InstructionTemplates::default(),
        )
        .unwrap();
        let mut rng = crate::rng::derive_rng(0, "t", StrategyTag::Bon, crate::rng::Stream::Gen);
        let mut budget = Budget::new(1, 0);
        let out = generate(&ctx, &SamplingParams::default(), &Echo, &mut rng, &mut budget).unwrap();
        assert_eq!(out, Payload::text("draw the page"));
        assert_eq!(budget.spent().n_gen_calls, 1);
        assert_eq!(budget.spent().gen_tokens, 3);
        assert!(matches!(
            generate(&ctx, &SamplingParams::default(), &Echo, &mut rng, &mut budget),
            Err(Error::BudgetExceeded { kind: "generation", .. })
        ));
    }

    #[test]
    fn sampling_params_validation() {
        SamplingParams::default().validate().unwrap();
        for bad in [
            SamplingParams { temperature: -0.1, ..Default::default() },
            SamplingParams { top_p: 0.0, ..Default::default() },
            SamplingParams { top_p: 1.5, ..Default::default() },
            SamplingParams { max_tokens: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
