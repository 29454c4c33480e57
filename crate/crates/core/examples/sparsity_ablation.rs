//! Coarsening the verifier's score into fewer bins hurts IAD more than
//! Best-of-N, because IAD's accept/reject step needs to see small
//! improvements.

use iad_core::generators::{SyntheticGenerator, SyntheticModelSpec};
use iad_core::harness::synthetic_task;
use iad_core::metrics::{mean_stderr, non_increasing, LevelStat};
use iad_core::strategies::{run_strategy, RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::StrategyTag;
use iad_core::verifiers::{HammingVerifier, SparsityLevel};

fn main() {
    let mut levels = Vec::new();
    for level in SparsityLevel::ALL {
        let mut means = Vec::new();
        for tag in [StrategyTag::Iad, StrategyTag::Bon] {
            let cfg = StrategyConfig::new(tag, 6).with_sparsity(level);
            let scores: Vec<f64> = (0..500u64)
                .map(|seed| {
                    let t = synthetic_task(0, &format!("task-{seed}"), 16, 7);
                    let gen = SyntheticGenerator::new(SyntheticModelSpec {
                        length: 16,
                        prior_mode: t.prior_mode,
                        tau: 0.05,
                        mu: 0.1,
                        mu_directed: 0.02,
                    })
                    .unwrap();
                    let ctx = RunContext::new("sparsity", "", seed, &t.task.task_id, tag);
                    let r = run_strategy(&t.task, StrategyDeps::new(&gen, &HammingVerifier), &cfg, ctx).unwrap();
                    // selection used the coarse score; report the exact one
                    r.winner_candidate().and_then(|c| c.true_score).unwrap_or(0.0)
                })
                .collect();
            means.push(mean_stderr(&scores));
        }
        println!("{level}: IAD {:.4}  BON {:.4}  gap {:+.4}", means[0].0, means[1].0, means[0].0 - means[1].0);
        levels.push(LevelStat { label: level.to_string(), mean: means[0].0, stderr: means[0].1 });
    }
    let verdict = non_increasing(levels, None);
    println!("IAD non-increasing NS -> ES: {}", verdict.holds);
}
