//! The harness ledger survives interruption. A run is cut short, resumed
//! from its manifest, and ends byte-identical to an uninterrupted run.

use std::fs;

use iad_core::harness::{self, RunManifest, RunOptions, LEDGER_FILE, MANIFEST_FILE};
use iad_core::ledger::ledger_bytes;

const CONFIG: &str = r#"
name = "resume-demo"
task_family = "synthetic_bitstring"
output_dir = "runs/example"
task_params = { n_tasks = 2 }
seeds = [1, 2, 3, 4, 5]
n_grid = [4]
temperature_grid = [0.1]

[[strategies]]
strategy = "BON"

[[strategies]]
strategy = "IAD"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("exp.toml");
    fs::write(&config, CONFIG)?;

    let full = dir.path().join("full");
    harness::run_experiment(&config, &RunOptions { output_dir: Some(full.clone()), ..Default::default() })?;

    let cut = dir.path().join("cut");
    let partial = RunOptions { output_dir: Some(cut.clone()), stop_after: Some(7), ..Default::default() };
    let s = harness::run_experiment(&config, &partial)?;
    let manifest = RunManifest::load(&cut.join(MANIFEST_FILE))?;
    println!("interrupted: {} ({} of {} runs done)", s.interrupted, manifest.completed_runs, manifest.total_runs);

    let s = harness::resume(&cut.join(MANIFEST_FILE), &RunOptions::default())?;
    println!("resumed: {} executed, {} skipped", s.executed, s.skipped);

    let same = ledger_bytes(full.join(LEDGER_FILE))? == ledger_bytes(cut.join(LEDGER_FILE))?;
    println!("ledgers identical: {same}");
    for f in &s.report_files {
        println!("  {}", f.display());
    }
    Ok(())
}
