//! Scoring `R(x, y)`, pairwise preference, judge critiques, and the
//! sparsity/noise wrappers used to degrade the verifier signal.

mod degrade;
mod judge;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use degrade::{add_noise, sparsify, NoiseSpec, SparsityLevel};
pub use judge::{
    critique, parse_wrong_positions, Judge, JudgeRequest, SyntheticDiffJudge, DEFAULT_JUDGE_TOKEN_CAP,
};

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{check_score, compare_candidates, Candidate, Payload, TaskInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierOutcome {
    pub score: f64,
    pub raw_score: f64,
    pub critique: Option<String>,
    pub cost_judge_calls: u32,
}

impl VerifierOutcome {
    pub fn new(score: f64, raw_score: f64) -> Result<Self> {
        check_score(score)?;
        Ok(VerifierOutcome {
            score,
            raw_score,
            critique: None,
            cost_judge_calls: 0,
        })
    }
}

pub trait Verifier: Send + Sync {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome>;

    /// Exact verifiers are deterministic functions of the hidden reference.
    fn is_exact(&self) -> bool {
        false
    }
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        (**self).score(task, response)
    }

    fn is_exact(&self) -> bool {
        (**self).is_exact()
    }
}

fn reference(task: &TaskInstance) -> Result<&Payload> {
    task.hidden_reference
        .as_ref()
        .ok_or_else(|| Error::MissingReference(task.task_id.clone()))
}

/// Synthetic exact verifier: `1 - hamming(y, y*) / L`. The raw score is
/// the number of matching bits.
#[derive(Clone, Copy, Debug, Default)]
pub struct HammingVerifier;

impl Verifier for HammingVerifier {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        let target = reference(task)?
            .as_bits()
            .ok_or_else(|| Error::VerifierFailure("hidden reference is not a bitstring".into()))?;
        let y = response
            .as_bits()
            .ok_or_else(|| Error::VerifierFailure("response is not a bitstring".into()))?;
        if y.len() != target.len() {
            return Err(Error::VerifierFailure(format!(
                "response length {} differs from reference length {}",
                y.len(),
                target.len()
            )));
        }
        if target.is_empty() {
            return VerifierOutcome::new(1.0, 0.0);
        }
        let matches = target.len() - y.hamming(target);
        VerifierOutcome::new(matches as f64 / target.len() as f64, matches as f64)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Exact verifier scoring 1 on an exact match with the reference, else 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactMatchVerifier;

impl Verifier for ExactMatchVerifier {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        let hit = reference(task)?.render().trim() == response.render().trim();
        let s = if hit { 1.0 } else { 0.0 };
        VerifierOutcome::new(s, s)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// An external scorer that reports in its own units over a declared range,
/// e.g. a layout similarity in 0..100.
pub trait RawScorer: Send + Sync {
    fn raw_score(&self, task: &TaskInstance, response: &Payload) -> Result<f64>;

    /// `(worst, best)` in native units.
    fn raw_range(&self) -> (f64, f64);

    fn is_exact(&self) -> bool {
        false
    }
}

/// Adapts a [`RawScorer`] to the normalized [0, 1] verifier contract.
#[derive(Clone, Debug)]
pub struct Normalized<S>(pub S);

impl<S: RawScorer> Verifier for Normalized<S> {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        let raw = self.0.raw_score(task, response)?;
        if !raw.is_finite() {
            return Err(Error::InvalidScore(raw));
        }
        let (lo, hi) = self.0.raw_range();
        if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::VerifierFailure(format!(
                "declared raw range [{lo}, {hi}] is empty"
            )));
        }
        VerifierOutcome::new(((raw - lo) / (hi - lo)).clamp(0.0, 1.0), raw)
    }

    fn is_exact(&self) -> bool {
        self.0.is_exact()
    }
}

/// A verifier as seen by a strategy: the inner score, then additive noise,
/// then sparsification. Strategies only ever see the degraded score.
#[derive(Clone, Copy)]
pub struct DegradedScorer<'a> {
    pub verifier: &'a dyn Verifier,
    pub sparsity: SparsityLevel,
    pub noise: NoiseSpec,
}

/// Degraded outcome plus the undegraded score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredResponse {
    pub outcome: VerifierOutcome,
    pub exact_score: f64,
}

impl<'a> DegradedScorer<'a> {
    pub fn exact(verifier: &'a dyn Verifier) -> Self {
        DegradedScorer {
            verifier,
            sparsity: SparsityLevel::NS,
            noise: NoiseSpec::NONE,
        }
    }

    pub fn is_degraded(&self) -> bool {
        self.sparsity != SparsityLevel::NS || self.noise.sigma > 0.0
    }

    pub fn score(
        &self,
        task: &TaskInstance,
        response: &Payload,
        noise_rng: &mut StreamRng,
    ) -> Result<ScoredResponse> {
        let outcome = self.verifier.score(task, response)?;
        let exact_score = outcome.score;
        let noisy = add_noise(outcome, self.noise, noise_rng);
        Ok(ScoredResponse {
            outcome: sparsify(noisy, self.sparsity),
            exact_score,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preference {
    A,
    B,
}

/// Scores both responses through `scorer` and returns the preferred one.
/// Exact ties fall back to [`compare_candidates`] (earlier candidate wins).
pub fn compare(
    task: &TaskInstance,
    a: &Candidate,
    b: &Candidate,
    scorer: &DegradedScorer<'_>,
    noise_rng: &mut StreamRng,
) -> Result<Preference> {
    let sa = scorer.score(task, &a.response, noise_rng)?.outcome.score;
    let sb = scorer.score(task, &b.response, noise_rng)?.outcome.score;
    let a = Candidate { score: sa, ..a.clone() };
    let b = Candidate { score: sb, ..b.clone() };
    Ok(match compare_candidates(&a, &b)? {
        Ordering::Greater => Preference::B,
        _ => Preference::A,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Stream};
    use crate::types::{BitString, StrategyTag};
    use proptest::prelude::*;

    fn bits(s: &str) -> Payload {
        Payload::Bits(s.parse().unwrap())
    }

    fn task(reference: &str) -> TaskInstance {
        TaskInstance::new("t", Payload::text("x")).with_reference(bits(reference))
    }

    fn rng() -> StreamRng {
        derive_rng(0, "t", StrategyTag::Bon, Stream::Noise)
    }

    fn candidate(resp: &str, index: u32) -> Candidate {
        Candidate {
            response: bits(resp),
            score: 0.0,
            raw_score: 0.0,
            true_score: None,
            critique: None,
            iteration: 0,
            index,
            strategy_tag: StrategyTag::Bon,
            gen_calls_used: 1,
            judge_calls_used: 0,
            equivalence_key: None,
        }
    }

    #[test]
    fn hamming_examples() {
        let t = task("1010");
        let v = HammingVerifier;
        assert_eq!(v.score(&t, &bits("1010")).unwrap().score, 1.0);
        assert_eq!(v.score(&t, &bits("0101")).unwrap().score, 0.0);
        let o = v.score(&t, &bits("1110")).unwrap();
        assert_eq!(o.score, 0.75);
        assert_eq!(o.raw_score, 3.0);
        assert_eq!(o.cost_judge_calls, 0);
        assert!(o.critique.is_none());
    }

    #[test]
    fn exact_verifier_requires_reference() {
        let t = TaskInstance::new("t", Payload::text("x"));
        assert!(matches!(
            HammingVerifier.score(&t, &bits("1")),
            Err(Error::MissingReference(_))
        ));
        assert!(matches!(
            ExactMatchVerifier.score(&t, &Payload::text("a")),
            Err(Error::MissingReference(_))
        ));
    }

    #[test]
    fn normalization_records_raw_units() {
        struct Layout;
        impl RawScorer for Layout {
            fn raw_score(&self, _: &TaskInstance, r: &Payload) -> Result<f64> {
                Ok(r.token_count() as f64 * 10.0)
            }
            fn raw_range(&self) -> (f64, f64) {
                (0.0, 100.0)
            }
        }
        let o = Normalized(Layout)
            .score(&task("1"), &Payload::text("a b c"))
            .unwrap();
        assert!((o.score - 0.3).abs() < 1e-12);
        assert_eq!(o.raw_score, 30.0);
        let o = Normalized(Layout)
            .score(&task("1"), &Payload::text("w ".repeat(20)))
            .unwrap();
        assert_eq!(o.score, 1.0);
    }

    #[test]
    fn compare_picks_argmax() {
        let t = task("1111");
        let s = DegradedScorer::exact(&HammingVerifier);
        // 0.75 vs 0.25
        let a = candidate("1110", 0);
        let b = candidate("1000", 1);
        assert_eq!(compare(&t, &a, &b, &s, &mut rng()).unwrap(), Preference::A);
        assert_eq!(compare(&t, &b, &a, &s, &mut rng()).unwrap(), Preference::B);
    }

    #[test]
    fn compare_tie_goes_to_earlier() {
        let t = task("1111");
        let s = DegradedScorer::exact(&HammingVerifier);
        let a = candidate("1110", 0);
        let b = candidate("0111", 1);
        assert_eq!(compare(&t, &a, &b, &s, &mut rng()).unwrap(), Preference::A);
        assert_eq!(compare(&t, &b, &a, &s, &mut rng()).unwrap(), Preference::B);
    }

    #[test]
    fn compare_under_extreme_sparsity_loses_discrimination() {
        // true scores 0.6 and 0.9 both map to 0.75 at ES
        let t = TaskInstance::new("t", Payload::text("x"))
            .with_reference(Payload::Bits(BitString(vec![true; 10])));
        let s = DegradedScorer {
            verifier: &HammingVerifier,
            sparsity: SparsityLevel::ES,
            noise: NoiseSpec::NONE,
        };
        let mut lo = candidate("1111110000", 0);
        let mut hi = candidate("1111111110", 1);
        assert_eq!(compare(&t, &lo, &hi, &s, &mut rng()).unwrap(), Preference::A);
        lo.index = 1;
        hi.index = 0;
        assert_eq!(compare(&t, &lo, &hi, &s, &mut rng()).unwrap(), Preference::B);
    }

    proptest! {
        #[test]
        fn compare_matches_brute_force_argmax(
            reference in proptest::collection::vec(any::<bool>(), 8),
            ya in proptest::collection::vec(any::<bool>(), 8),
            yb in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let r = BitString(reference);
            let t = TaskInstance::new("t", Payload::text("x")).with_reference(Payload::Bits(r.clone()));
            let (ya, yb) = (BitString(ya), BitString(yb));
            let a = Candidate { response: Payload::Bits(ya.clone()), ..candidate("0", 0) };
            let b = Candidate { response: Payload::Bits(yb.clone()), ..candidate("0", 1) };
            // fewer wrong bits wins; ties keep the earlier candidate
            let expected = if yb.hamming(&r) < ya.hamming(&r) { Preference::B } else { Preference::A };
            let s = DegradedScorer::exact(&HammingVerifier);
            prop_assert_eq!(compare(&t, &a, &b, &s, &mut rng()).unwrap(), expected);
        }

        #[test]
        fn es_preference_is_tie_rule_exactly_when_bins_coincide(
            wa in 0usize..=10, wb in 0usize..=10,
        ) {
            let r = BitString(vec![true; 10]);
            let t = TaskInstance::new("t", Payload::text("x")).with_reference(Payload::Bits(r.clone()));
            let ya = r.flipped(&(0..wa).collect::<Vec<_>>());
            let yb = r.flipped(&(0..wb).collect::<Vec<_>>());
            let a = Candidate { response: Payload::Bits(ya), ..candidate("0", 0) };
            let b = Candidate { response: Payload::Bits(yb), ..candidate("0", 1) };
            let s = DegradedScorer { verifier: &HammingVerifier, sparsity: SparsityLevel::ES, noise: NoiseSpec::NONE };
            let (sa, sb) = (1.0 - wa as f64 / 10.0, 1.0 - wb as f64 / 10.0);
            let same_bin = (sa >= 0.5) == (sb >= 0.5);
            let pref = compare(&t, &a, &b, &s, &mut rng()).unwrap();
            if same_bin {
                prop_assert_eq!(pref, Preference::A);
            } else {
                prop_assert_eq!(pref, if sa > sb { Preference::A } else { Preference::B });
            }
        }
    }
}
