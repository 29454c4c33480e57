//! Multi-step episodes. At every step a strategy picks the action, the
//! environment advances, and the reward arrives at the end.

use iad_core::error::Result;
use iad_core::strategies::episodic::{run_episodic, ChoiceGenerator, ScriptedEnv, StrategyPolicy};
use iad_core::strategies::{RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::{Payload, StrategyTag, TaskInstance};
use iad_core::verifiers::ExactMatchVerifier;

fn main() -> Result<()> {
    let moves: Vec<String> = ["north", "south", "east", "west"].map(String::from).to_vec();
    let script = vec!["east".to_string(), "east".into(), "north".into()];
    let task = TaskInstance::new("maze", Payload::text("reach the exit"));
    let gen = ChoiceGenerator { options: moves };

    for tag in [StrategyTag::SingleTurn, StrategyTag::Bon, StrategyTag::Iad] {
        let n = if tag == StrategyTag::SingleTurn { 1 } else { 3 };
        let mut solved = 0;
        for seed in 0..200 {
            let mut policy = StrategyPolicy {
                deps: StrategyDeps::new(&gen, &ExactMatchVerifier),
                cfg: StrategyConfig::new(tag, n),
                seed,
            };
            let mut env = ScriptedEnv::new(script.clone());
            let r = run_episodic(&task, &mut policy, &mut env, RunContext::new("maze", "", seed, "maze", tag));
            if r.final_score() == Some(1.0) {
                solved += 1;
            }
            if seed == 0 {
                let ep = r.episode.as_ref().unwrap();
                println!("{tag} seed 0: {ep:?}, {} generation calls", r.budget.n_gen_calls);
            }
        }
        println!("{tag} n={n}: solved {solved}/200");
    }
    Ok(())
}
