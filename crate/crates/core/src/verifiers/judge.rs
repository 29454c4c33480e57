use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::generators::TokenCaps;
use crate::types::{truncate_text_tokens, Candidate, Payload, TaskInstance};

pub const DEFAULT_JUDGE_TOKEN_CAP: usize = 200;

/// What a judge sees: the task, excerpts of the incumbent best and worst
/// responses, and their current scores.
#[derive(Clone, Debug)]
pub struct JudgeRequest<'a> {
    pub task: &'a TaskInstance,
    pub best_excerpt: Payload,
    pub worst_excerpt: Payload,
    pub best_score: f64,
    pub worst_score: f64,
}

pub trait Judge: Send + Sync {
    fn critique(&self, request: &JudgeRequest<'_>) -> Result<String>;
}

impl<J: Judge + ?Sized> Judge for &J {
    fn critique(&self, request: &JudgeRequest<'_>) -> Result<String> {
        (**self).critique(request)
    }
}

/// Oracle judge for the bitstring family. Lists the 1-based positions where
/// the best excerpt disagrees with the hidden reference, e.g.
/// `wrong positions: 2 7`. Empty when nothing is wrong.
#[derive(Clone, Copy, Debug, Default)]
pub struct SyntheticDiffJudge;

pub(crate) const DIFF_PREFIX: &str = "wrong positions:";

impl Judge for SyntheticDiffJudge {
    fn critique(&self, request: &JudgeRequest<'_>) -> Result<String> {
        let reference = request
            .task
            .hidden_reference
            .as_ref()
            .and_then(Payload::as_bits)
            .ok_or_else(|| Error::MissingReference(request.task.task_id.clone()))?;
        let best = request
            .best_excerpt
            .as_bits()
            .ok_or_else(|| Error::JudgeUnavailable("best excerpt is not a bitstring".into()))?;
        let wrong: Vec<String> = best
            .bits()
            .iter()
            .zip(reference.bits())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| (i + 1).to_string())
            .collect();
        if wrong.is_empty() {
            return Ok(String::new());
        }
        Ok(format!("{DIFF_PREFIX} {}", wrong.join(" ")))
    }
}

/// Parses a diff-judge critique back into 0-based positions. Tolerates
/// truncation and ignores anything that is not a position.
pub fn parse_wrong_positions(critique: &str) -> Vec<usize> {
    let Some(rest) = critique.trim_start().strip_prefix(DIFF_PREFIX) else {
        return Vec::new();
    };
    rest.split_whitespace()
        .filter_map(|t| t.parse::<usize>().ok())
        .filter(|&p| p >= 1)
        .map(|p| p - 1)
        .collect()
}

/// Obtains one critique of the incumbent pair, truncated to the judge token
/// cap. Only successful calls are charged to the judge budget.
pub fn critique(
    task: &TaskInstance,
    best: &Candidate,
    worst: &Candidate,
    judge: &dyn Judge,
    budget: &mut Budget,
    caps: TokenCaps,
) -> Result<String> {
    budget.check_judge()?;
    let request = JudgeRequest {
        task,
        best_excerpt: best.response.truncate_tokens(caps.context),
        worst_excerpt: worst.response.truncate_tokens(caps.context),
        best_score: best.score,
        worst_score: worst.score,
    };
    let text = judge.critique(&request).map_err(|e| match e {
        Error::JudgeUnavailable(_) => e,
        other => Error::JudgeUnavailable(other.to_string()),
    })?;
    let text = truncate_text_tokens(&text, caps.judge).to_string();
    budget.record_judge(Payload::text(text.as_str()).token_count() as u64);
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BitString, StrategyTag};

    fn cand(bits: &str) -> Candidate {
        Candidate {
            response: Payload::Bits(bits.parse().unwrap()),
            score: 0.5,
            raw_score: 0.5,
            true_score: None,
            critique: None,
            iteration: 0,
            index: 0,
            strategy_tag: StrategyTag::IadFb,
            gen_calls_used: 1,
            judge_calls_used: 0,
            equivalence_key: None,
        }
    }

    fn task(reference: &str) -> TaskInstance {
        TaskInstance::new("t", Payload::text("x"))
            .with_reference(Payload::Bits(reference.parse().unwrap()))
    }

    #[test]
    fn diff_names_exactly_the_wrong_index() {
        let mut b = Budget::new(4, 4);
        let text = critique(
            &task("1010"),
            &cand("1110"),
            &cand("0000"),
            &SyntheticDiffJudge,
            &mut b,
            TokenCaps::default(),
        )
        .unwrap();
        assert_eq!(text, "wrong positions: 2");
        assert_eq!(parse_wrong_positions(&text), vec![1]);
        assert_eq!(b.spent().k_judge_calls, 1);
        assert_eq!(b.spent().judge_tokens, 3);
    }

    #[test]
    fn perfect_best_gets_empty_critique() {
        let mut b = Budget::new(4, 4);
        let text = critique(
            &task("1010"),
            &cand("1010"),
            &cand("0000"),
            &SyntheticDiffJudge,
            &mut b,
            TokenCaps::default(),
        )
        .unwrap();
        assert!(text.is_empty());
        assert!(parse_wrong_positions(&text).is_empty());
    }

    #[test]
    fn critique_is_truncated_to_cap() {
        let reference = BitString(vec![true; 64]);
        let t = TaskInstance::new("t", Payload::text("x")).with_reference(Payload::Bits(reference));
        let best = Candidate {
            response: Payload::Bits(BitString(vec![false; 64])),
            ..cand("0")
        };
        let caps = TokenCaps { context: 300, judge: 5 };
        let mut b = Budget::new(4, 4);
        let text = critique(&t, &best, &best, &SyntheticDiffJudge, &mut b, caps).unwrap();
        assert!(Payload::text(text.as_str()).token_count() <= 5);
        assert_eq!(text, "wrong positions: 1 2 3");
        assert_eq!(parse_wrong_positions(&text), vec![0, 1, 2]);
    }

    #[test]
    fn exhausted_budget_refuses() {
        let mut b = Budget::new(4, 0);
        let err = critique(
            &task("1010"),
            &cand("1110"),
            &cand("1110"),
            &SyntheticDiffJudge,
            &mut b,
            TokenCaps::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { kind: "judge", .. }));
    }

    #[test]
    fn failing_judge_is_unavailable_and_uncharged() {
        struct Down;
        impl Judge for Down {
            fn critique(&self, _: &JudgeRequest<'_>) -> Result<String> {
                Err(Error::VerifierFailure("503".into()))
            }
        }
        let mut b = Budget::new(4, 4);
        let err = critique(&task("1"), &cand("1"), &cand("1"), &Down, &mut b, TokenCaps::default())
            .unwrap_err();
        assert!(matches!(err, Error::JudgeUnavailable(_)));
        assert_eq!(b.spent().k_judge_calls, 0);
    }

    #[test]
    fn parser_ignores_foreign_text() {
        assert!(parse_wrong_positions("looks fine to me").is_empty());
        assert_eq!(parse_wrong_positions("wrong positions: 3 x 0 5"), vec![2, 4]);
    }
}
