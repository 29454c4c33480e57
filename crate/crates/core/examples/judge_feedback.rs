//! IAD with a judge in the loop. The first `k` refinements carry a critique
//! of the current best answer.
//!
//! Two judges are compared: `SyntheticDiffJudge`, which knows the hidden
//! target and names the wrong bits, and `SelfJudge`, which asks the
//! generator itself and so has no extra information.

use iad_core::generators::{SyntheticGenerator, SyntheticModelSpec};
use iad_core::harness::synthetic_task;
use iad_core::metrics::mean_stderr;
use iad_core::rng::{derive_rng, Stream};
use iad_core::strategies::{iad, iad_fb, RunContext, SelfJudge, StrategyConfig};
use iad_core::types::StrategyTag;
use iad_core::verifiers::{HammingVerifier, SyntheticDiffJudge};

fn main() -> iad_core::error::Result<()> {
    let (mut plain, mut oracle, mut own) = (vec![], vec![], vec![]);
    for seed in 0..300u64 {
        let t = synthetic_task(0, &format!("task-{seed}"), 16, 7);
        let gen = SyntheticGenerator::new(SyntheticModelSpec {
            length: 16,
            prior_mode: t.prior_mode,
            tau: 0.05,
            mu: 0.1,
            mu_directed: 0.02,
        })?;
        let ctx = |tag| RunContext::new("fb", "", seed, &t.task.task_id, tag);
        let fb = StrategyConfig::new(StrategyTag::IadFb, 4).with_k(4);

        let r = iad(&t.task, &gen, &HammingVerifier, &StrategyConfig::new(StrategyTag::Iad, 4), ctx(StrategyTag::Iad))?;
        plain.push(r.final_score().unwrap_or(0.0));

        let r = iad_fb(&t.task, &gen, &HammingVerifier, &SyntheticDiffJudge, &fb, ctx(StrategyTag::IadFb))?;
        oracle.push(r.final_score().unwrap_or(0.0));
        if seed == 0 {
            for st in &r.trajectory.as_ref().unwrap().states {
                let proposed = st.proposed.as_ref().map_or(0.0, |c| c.score);
                println!("iter {} score {proposed:.3} accepted {:<5} critique {:?}", st.t, st.accepted, st.critique_in_context);
            }
        }

        let judge = SelfJudge::new(&gen, derive_rng(seed, &t.task.task_id, StrategyTag::IadFb, Stream::Verifier));
        let r = iad_fb(&t.task, &gen, &HammingVerifier, &judge, &fb, ctx(StrategyTag::IadFb))?;
        own.push(r.final_score().unwrap_or(0.0));
    }
    for (name, xs) in [("IAD", &plain), ("IAD-fb, diff judge", &oracle), ("IAD-fb, self judge", &own)] {
        let (m, se) = mean_stderr(xs);
        println!("{name:<20} {m:.4} ± {se:.4}");
    }
    Ok(())
}
