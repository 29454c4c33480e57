//! Pass@k and Majority@k over sampled candidates, then the same metrics
//! computed from a harness ledger.

use iad_core::metrics::{majority_at_k, pass_at_k, MetricsReport};
use iad_core::types::{RunRecord, StrategyTag};

fn main() -> iad_core::error::Result<()> {
    // per task: candidates in draw order, (answer, is_correct)
    let tasks = vec![
        vec![("7", false), ("3", true), ("3", true), ("7", false)],
        vec![("a", false), ("b", false), ("c", false), ("a", false)],
        vec![("x", true), ("y", false), ("y", false), ("x", true)],
    ];
    let flags: Vec<Vec<bool>> = tasks.iter().map(|t| t.iter().map(|c| c.1).collect()).collect();
    for k in 1..=4 {
        println!("k={k}  pass@k {:.3}  majority@k {:.3}", pass_at_k(&flags, k)?, majority_at_k(&tasks, k)?);
    }

    let ledger = std::env::args().nth(1);
    if let Some(path) = ledger {
        let records: Vec<RunRecord> = iad_core::ledger::read_ledger(&path)?.records;
        let report = MetricsReport::from_records(&records, 1.0)?;
        for (series, by_k) in &report.pass_at_k {
            println!("{series}: {by_k:?}");
        }
        let bon = records.iter().filter(|r| r.strategy_tag == StrategyTag::Bon).count();
        println!("{} records, {bon} from BON", records.len());
    } else {
        println!("pass a ledger.jsonl path to summarize a real run");
    }
    Ok(())
}
