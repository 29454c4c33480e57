use proptest::prelude::*;

use super::*;
use crate::types::{test_candidate, BudgetLedger, Payload, RunStatus};

const T: bool = true;
const F: bool = false;

#[test]
fn pass_at_k_examples() {
    assert_eq!(pass_at_k(&[vec![F, T], vec![F, F]], 2).unwrap(), 0.5);
    assert_eq!(pass_at_k(&[vec![F, T], vec![F, F]], 1).unwrap(), 0.0);
    assert_eq!(pass_at_k(&[vec![T], vec![T], vec![T]], 1).unwrap(), 1.0);
}

#[test]
fn pass_at_k_errors() {
    assert!(matches!(
        pass_at_k(&[vec![T, T], vec![F]], 2),
        Err(Error::InsufficientCandidates { k: 2, available: 1, task: 1 })
    ));
    assert!(matches!(pass_at_k(&[], 1), Err(Error::EmptyInput)));
    assert!(pass_at_k(&[vec![T]], 0).is_err());
}

#[test]
fn majority_at_k_examples() {
    let task = |xs: &[(&'static str, bool)]| xs.to_vec();
    assert_eq!(majority_at_k(&[task(&[("A", T), ("A", T), ("B", F)])], 3).unwrap(), 1.0);
    assert_eq!(majority_at_k(&[task(&[("A", F), ("A", F), ("B", T)])], 3).unwrap(), 0.0);
    assert_eq!(majority_at_k(&[task(&[("A", F), ("B", T)])], 2).unwrap(), 0.0);
    assert_eq!(majority_at_k(&[task(&[("B", T), ("A", F)])], 2).unwrap(), 1.0);
    // only the first k candidates vote
    assert_eq!(majority_at_k(&[task(&[("A", T), ("B", F), ("B", F)])], 2).unwrap(), 1.0);
    assert_eq!(majority_at_k(&[task(&[("A", T), ("B", F), ("B", F)])], 3).unwrap(), 0.0);
}

fn record(tag: StrategyTag, task: &str, seed: u64, n: u32, score: f64) -> RunRecord {
    let mut c = test_candidate(score, 0, 0);
    c.strategy_tag = tag;
    RunRecord {
        run_id: format!("{tag}-{task}-{seed}-{n}"),
        config_hash: "h".into(),
        seed,
        task_id: task.into(),
        strategy_tag: tag,
        variant: None,
        candidates: vec![c],
        winner: Some(0),
        trajectory: None,
        budget: BudgetLedger {
            n_gen_calls: n,
            ..Default::default()
        },
        wall_time_ms: 0,
        status: RunStatus::Completed,
        contexts: vec![],
        events: vec![],
        episode: None,
        extra: Default::default(),
    }
}

#[test]
fn curve_examples() {
    let one = accuracy_vs_calls(&[record(StrategyTag::Bon, "t", 0, 2, 0.7)]).unwrap();
    assert_eq!(one["BON"].len(), 1);
    assert_eq!((one["BON"][0].calls, one["BON"][0].value), (2, 0.7));

    let two = accuracy_vs_calls(&[
        record(StrategyTag::Bon, "t", 0, 4, 0.6),
        record(StrategyTag::Bon, "t", 1, 4, 0.8),
    ])
    .unwrap();
    assert!((two["BON"][0].value - 0.7).abs() < 1e-12);
    assert!((two["BON"][0].stderr - 0.1).abs() < 1e-12);

    assert!(matches!(accuracy_vs_calls(&[]), Err(Error::EmptyInput)));
}

#[test]
fn curves_are_sorted_and_split_by_variant() {
    let mut recs = vec![
        record(StrategyTag::Iad, "t", 0, 6, 0.9),
        record(StrategyTag::Iad, "t", 0, 2, 0.5),
        record(StrategyTag::Iad, "t", 0, 4, 0.7),
    ];
    let mut es = record(StrategyTag::Iad, "t", 0, 2, 0.1);
    es.variant = Some("sparsity=ES".into());
    recs.push(es);
    let c = accuracy_vs_calls(&recs).unwrap();
    let calls: Vec<u32> = c["IAD"].iter().map(|p| p.calls).collect();
    assert_eq!(calls, vec![2, 4, 6]);
    assert_eq!(c["IAD[sparsity=ES]"].len(), 1);
}

#[test]
fn failed_runs_score_zero() {
    let mut r = record(StrategyTag::Bon, "t", 1, 2, 0.8);
    r.winner = None;
    r.status = RunStatus::Failed { reason: "down".into() };
    let rep = MetricsReport::from_records(&[record(StrategyTag::Bon, "t", 0, 2, 0.8), r], 1.0).unwrap();
    assert!((rep.per_strategy["BON"].mean_final_score - 0.4).abs() < 1e-12);
    assert_eq!(rep.failed_runs, 1);
}

#[test]
fn report_summarizes_the_largest_budget() {
    let mut recs = Vec::new();
    for seed in 0..3 {
        recs.push(record(StrategyTag::Bon, "t", seed, 1, 0.2));
        recs.push(record(StrategyTag::Bon, "t", seed, 4, if seed == 0 { 1.0 } else { 0.5 }));
    }
    let rep = MetricsReport::from_records(&recs, 1.0).unwrap();
    let s = &rep.per_strategy["BON"];
    assert_eq!(s.runs, 3);
    assert!((s.mean_final_score - 2.0 / 3.0).abs() < 1e-12);
    assert!((s.accuracy - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(rep.seeds, vec![0, 1, 2]);
    assert_eq!(rep.n_tasks, 1);
    assert_eq!(rep.pass_at_k_estimator, PASS_AT_K_ESTIMATOR);
}

#[test]
fn report_candidate_metrics_use_equivalence_keys() {
    let mut r = record(StrategyTag::BonSc, "t", 0, 3, 0.0);
    r.candidates = [("x", 0.0), ("y", 1.0), ("x", 0.0)]
        .iter()
        .enumerate()
        .map(|(i, (resp, s))| {
            let mut c = test_candidate(*s, 0, i as u32);
            c.strategy_tag = StrategyTag::BonSc;
            c.response = Payload::text(*resp);
            c
        })
        .collect();
    let rep = MetricsReport::from_records(&[r], 1.0).unwrap();
    assert_eq!(rep.pass_at_k["BONSC"], [(1, 0.0), (2, 1.0), (3, 1.0)].into());
    assert_eq!(rep.majority_at_k["BONSC"], [(1, 0.0), (2, 0.0), (3, 0.0)].into());
}

#[test]
fn write_is_deterministic() {
    let recs = vec![
        record(StrategyTag::Bon, "t", 0, 2, 0.5),
        record(StrategyTag::Iad, "t", 0, 2, 0.75),
    ];
    let rep = MetricsReport::from_records(&recs, 1.0).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files = rep.write(a.path()).unwrap();
    MetricsReport::from_records(&recs, 1.0).unwrap().write(b.path()).unwrap();
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["curve_BON.csv", "curve_IAD.csv", "summary.json"]);
    for n in &names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap());
    }
    let csv = fs::read_to_string(a.path().join("curve_IAD.csv")).unwrap();
    assert_eq!(csv, "strategy,calls,value,stderr\nIAD,2,0.75,0\n");
}

#[test]
fn file_stems_are_filesystem_safe() {
    assert_eq!(file_stem("IAD[tau=0.05,sparsity=ES]"), "IAD_tau=0.05_sparsity=ES");
}

proptest! {
    #[test]
    fn pass_at_k_is_monotone(tasks in prop::collection::vec(prop::collection::vec(any::<bool>(), 8), 1..20)) {
        let mut prev = 0.0;
        for k in 1..=8 {
            let p = pass_at_k(&tasks, k).unwrap();
            prop_assert!(p >= prev && (0.0..=1.0).contains(&p));
            prev = p;
        }
    }

    #[test]
    fn majority_at_k_is_a_fraction(tasks in prop::collection::vec(prop::collection::vec((0u8..3, any::<bool>()), 5), 1..20), k in 1usize..=5) {
        let m = majority_at_k(&tasks, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
        prop_assert_eq!(m, majority_at_k(&tasks, k).unwrap());
    }
}
