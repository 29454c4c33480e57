//! Gaussian noise on verifier scores, swept through the experiment harness.
//! The advantage of IAD over Best-of-N shrinks as sigma grows.

use std::fs;

use iad_core::harness::{self, RunOptions, LEDGER_FILE};
use iad_core::ledger::read_ledger;
use iad_core::metrics::paired_gap;
use iad_core::types::StrategyTag;

const CONFIG: &str = r#"
name = "noise"
task_family = "synthetic_bitstring"
output_dir = "runs/example"
seeds = { start = 0, count = 300 }
n_grid = [6]
temperature_grid = [0.05]
noise_grid = [0.0, 0.1, 0.3, 1.0]

[[strategies]]
strategy = "BON"

[[strategies]]
strategy = "IAD"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("noise.toml");
    fs::write(&config, CONFIG)?;
    let out = dir.path().join("out");
    let opts = RunOptions { output_dir: Some(out.clone()), non_durable: true, ..Default::default() };
    let summary = harness::run_experiment(&config, &opts)?;
    println!("{} runs, reports: {:?}", summary.executed, summary.report_files.len());

    let records = read_ledger(out.join(LEDGER_FILE))?.records;
    for sigma in ["0", "0.1", "0.3", "1"] {
        let variant = format!("sigma={sigma}");
        let pick = |tag| {
            records
                .iter()
                .filter(|r| r.strategy_tag == tag && r.variant.as_deref() == Some(variant.as_str()))
                .cloned()
                .collect::<Vec<_>>()
        };
        let gap = paired_gap(&pick(StrategyTag::Iad), &pick(StrategyTag::Bon))?;
        println!("sigma={sigma:<4} IAD - BON = {:+.4} (se {:.4}, {} pairs)", gap.mean, gap.stderr, gap.pairs);
    }
    Ok(())
}
