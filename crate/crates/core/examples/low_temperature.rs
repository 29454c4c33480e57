//! As the sampling temperature drops, independent draws collapse onto the
//! prior mode and reranking stops paying off. Conditioning on the best and
//! worst attempt keeps improving.

use iad_core::generators::{SyntheticGenerator, SyntheticModelSpec};
use iad_core::harness::synthetic_task;
use iad_core::metrics::mean_stderr;
use iad_core::strategies::{run_strategy, RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::StrategyTag;
use iad_core::verifiers::HammingVerifier;

fn mean_score(tag: StrategyTag, n: u32, tau: f64, seeds: u64) -> f64 {
    let scores: Vec<f64> = (0..seeds)
        .map(|seed| {
            let t = synthetic_task(0, &format!("task-{seed}"), 16, 7);
            let gen = SyntheticGenerator::new(SyntheticModelSpec {
                length: 16,
                prior_mode: t.prior_mode,
                tau,
                mu: 0.1,
                mu_directed: 0.02,
            })
            .unwrap();
            let ctx = RunContext::new("low-temp", "", seed, &t.task.task_id, tag);
            run_strategy(&t.task, StrategyDeps::new(&gen, &HammingVerifier), &StrategyConfig::new(tag, n), ctx)
                .unwrap()
                .final_score()
                .unwrap_or(0.0)
        })
        .collect();
    mean_stderr(&scores).0
}

fn main() {
    for tau in [0.3, 0.1, 0.05, 0.0] {
        let bon = mean_score(StrategyTag::Bon, 6, tau, 500) - mean_score(StrategyTag::Bon, 2, tau, 500);
        let iad = mean_score(StrategyTag::Iad, 6, tau, 500) - mean_score(StrategyTag::Iad, 2, tau, 500);
        println!("tau={tau:<5} gain n=2 -> 6: BON {bon:+.4}  IAD {iad:+.4}");
    }
}
