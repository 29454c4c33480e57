use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::generators::{ConditioningContext, Generator, SamplingParams};
use crate::rng::StreamRng;
use crate::verifiers::{Judge, JudgeRequest};

/// Judge backed by the generator itself, with no access to the hidden
/// reference. Plugging it into IAD-fb gives a self-refinement baseline.
pub struct SelfJudge<G> {
    pub generator: G,
    pub instruction: String,
    pub sampling: SamplingParams,
    rng: Mutex<StreamRng>,
}

impl<G: Generator> SelfJudge<G> {
    pub fn new(generator: G, rng: StreamRng) -> Self {
        SelfJudge {
            generator,
            instruction: "Point out what is wrong with the best attempt and how to fix it.".into(),
            sampling: SamplingParams::default(),
            rng: Mutex::new(rng),
        }
    }
}

impl<G: Generator> Judge for SelfJudge<G> {
    fn critique(&self, request: &JudgeRequest<'_>) -> Result<String> {
        let ctx = ConditioningContext {
            task_input: request.task.input.clone(),
            best_excerpt: Some(request.best_excerpt.clone()),
            worst_excerpt: Some(request.worst_excerpt.clone()),
            best_score: Some(request.best_score),
            instruction: self.instruction.clone(),
            critique: None,
            episode_history: request.task.episode_history.clone(),
        };
        let mut rng = self
            .rng
            .lock()
            .map_err(|_| Error::JudgeUnavailable("self-judge state poisoned".into()))?;
        let out = self.generator.generate(&ctx, &self.sampling, &mut rng)?;
        Ok(out.payload.render())
    }
}
