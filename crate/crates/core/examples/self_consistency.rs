//! Best-of-N with self-consistency on a free-text task: answers are grouped
//! by the number they state, and the earliest member of the largest group
//! wins. No verifier score is used to pick.

use iad_core::error::Result;
use iad_core::generators::{ConditioningContext, Generation, Generator, SamplingParams};
use iad_core::rng::StreamRng;
use iad_core::strategies::{run_strategy, FnEquivalence, RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::{Payload, StrategyTag, TaskInstance};
use iad_core::verifiers::{Verifier, VerifierOutcome};
use rand::Rng;

/// Right 40% of the time, in a few phrasings; otherwise one of two wrong
/// answers.
struct Arithmetic;

impl Generator for Arithmetic {
    fn generate(&self, _: &ConditioningContext, _: &SamplingParams, rng: &mut StreamRng) -> Result<Generation> {
        let text = match rng.random_range(0..10) {
            0 | 1 => "42",
            2 => "The answer is 42.",
            3 => "  42 ",
            4..=6 => "41",
            _ => "It is 44",
        };
        Ok(Generation { payload: Payload::text(text), tokens: 4 })
    }
}

fn stated_number(p: &Payload) -> Option<i64> {
    p.render()
        .split(|c: char| !c.is_ascii_digit())
        .rfind(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
}

struct NumberMatch;

impl Verifier for NumberMatch {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        let want = task.hidden_reference.as_ref().and_then(stated_number);
        let s = if want.is_some() && want == stated_number(response) { 1.0 } else { 0.0 };
        VerifierOutcome::new(s, s)
    }
}

fn main() -> Result<()> {
    let task = TaskInstance::new("sum", Payload::text("What is 17 + 25?")).with_reference(Payload::text("42"));
    let same_number = FnEquivalence(|_: &TaskInstance, p: &Payload| {
        Ok(stated_number(p).map_or_else(|| p.render(), |n| n.to_string()))
    });
    for n in [1, 5, 15] {
        let cfg = StrategyConfig::new(StrategyTag::BonSc, n);
        let runs = 400;
        let mut correct = 0;
        for seed in 0..runs {
            let deps = StrategyDeps::new(&Arithmetic, &NumberMatch).with_equivalence(&same_number);
            let r = run_strategy(&task, deps, &cfg, RunContext::new("sc", "", seed, "sum", StrategyTag::BonSc))?;
            if r.final_score() == Some(1.0) {
                correct += 1;
            }
        }
        println!("BON-SC n={n:<3} accuracy {:.3}", correct as f64 / runs as f64);
    }
    Ok(())
}
