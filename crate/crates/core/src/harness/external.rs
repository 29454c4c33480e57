//! Scorer, judge and equivalence adapters that run external commands.
//!
//! Each request is one JSON object on the child's stdin carrying an `op`
//! field; the reply is one JSON object on stdout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{CommandTransport, RetryPolicy};
use crate::strategies::{Equivalence, EquivalenceKey};
use crate::types::{Payload, TaskInstance};
use crate::verifiers::{Judge, JudgeRequest, Verifier, VerifierOutcome};

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request<'a> {
    Score {
        task: &'a TaskInstance,
        response: &'a Payload,
    },
    Critique {
        task: &'a TaskInstance,
        best: &'a Payload,
        worst: &'a Payload,
        best_score: f64,
        worst_score: f64,
    },
    Key {
        task: &'a TaskInstance,
        response: &'a Payload,
    },
}

#[derive(Deserialize)]
struct ScoreReply {
    score: f64,
    #[serde(default)]
    raw_score: Option<f64>,
    #[serde(default)]
    critique: Option<String>,
}

#[derive(Deserialize)]
struct CritiqueReply {
    critique: String,
}

#[derive(Deserialize)]
struct KeyReply {
    key: String,
}

pub struct CommandVerifier {
    pub transport: CommandTransport,
    pub retry: RetryPolicy,
}

impl Verifier for CommandVerifier {
    fn score(&self, task: &TaskInstance, response: &Payload) -> Result<VerifierOutcome> {
        let reply: ScoreReply = self
            .retry
            .run(|| self.transport.call(&Request::Score { task, response }))
            .map_err(|e| Error::VerifierFailure(e.to_string()))?;
        let mut out = VerifierOutcome::new(reply.score, reply.raw_score.unwrap_or(reply.score))?;
        out.critique = reply.critique;
        Ok(out)
    }
}

pub struct CommandJudge {
    pub transport: CommandTransport,
    pub retry: RetryPolicy,
}

impl Judge for CommandJudge {
    fn critique(&self, r: &JudgeRequest<'_>) -> Result<String> {
        let request = Request::Critique {
            task: r.task,
            best: &r.best_excerpt,
            worst: &r.worst_excerpt,
            best_score: r.best_score,
            worst_score: r.worst_score,
        };
        let reply: CritiqueReply = self
            .retry
            .run(|| self.transport.call(&request))
            .map_err(|e| Error::JudgeUnavailable(e.to_string()))?;
        Ok(reply.critique)
    }
}

pub struct CommandEquivalence {
    pub transport: CommandTransport,
    pub retry: RetryPolicy,
}

impl Equivalence for CommandEquivalence {
    fn key(&self, task: &TaskInstance, response: &Payload) -> Result<EquivalenceKey> {
        let reply: KeyReply = self
            .retry
            .run(|| self.transport.call(&Request::Key { task, response }))
            .map_err(|e| Error::VerifierFailure(e.to_string()))?;
        Ok(EquivalenceKey::digest(reply.key))
    }
}
