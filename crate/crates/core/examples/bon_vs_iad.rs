//! Best-of-N against iterative agentic decoding on the synthetic bitstring
//! task, at the same number of generation calls.
//!
//! ```bash
//! cargo run --release --example bon_vs_iad
//! ```

use iad_core::generators::{SyntheticGenerator, SyntheticModelSpec};
use iad_core::harness::synthetic_task;
use iad_core::metrics::mean_stderr;
use iad_core::strategies::{run_strategy, RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::StrategyTag;
use iad_core::verifiers::HammingVerifier;

fn main() -> iad_core::error::Result<()> {
    let seeds = 300;
    println!("{:>3}  {:>14}  {:>14}", "n", "BON", "IAD");
    for n in [1, 2, 4, 8] {
        let mut row = Vec::new();
        for tag in [StrategyTag::Bon, StrategyTag::Iad] {
            let cfg = StrategyConfig::new(tag, n);
            let mut scores = Vec::new();
            for seed in 0..seeds {
                let t = synthetic_task(0, &format!("task-{seed}"), 16, 7);
                let gen = SyntheticGenerator::new(SyntheticModelSpec {
                    length: 16,
                    prior_mode: t.prior_mode,
                    tau: 0.1,
                    mu: 0.1,
                    mu_directed: 0.02,
                })?;
                let ctx = RunContext::new("demo", "", seed, &t.task.task_id, tag);
                let record = run_strategy(&t.task, StrategyDeps::new(&gen, &HammingVerifier), &cfg, ctx)?;
                scores.push(record.final_score().unwrap_or(0.0));
            }
            let (m, se) = mean_stderr(&scores);
            row.push(format!("{m:.3} ± {se:.3}"));
        }
        println!("{n:>3}  {:>14}  {:>14}", row[0], row[1]);
    }
    Ok(())
}
