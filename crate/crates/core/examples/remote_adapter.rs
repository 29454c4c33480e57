//! Plugging in a remote generator. `Transport` is the seam: implement it
//! over any client, and `RemoteGenerator` adds retry with backoff and output
//! capping. Here a flaky in-process endpoint fails every third request.
//!
//! For a real endpoint, `CommandTransport` runs a program per request with
//! JSON on stdin and stdout; see the external adapter section of the README.

use std::sync::atomic::{AtomicU32, Ordering};

use iad_core::generators::{GenRequest, GenResponse, RemoteGenerator, RetryPolicy, TokenUsage, Transport, TransportError};
use iad_core::strategies::{run_strategy, RunContext, StrategyConfig, StrategyDeps};
use iad_core::types::{Payload, StrategyTag, TaskInstance};
use iad_core::verifiers::ExactMatchVerifier;

struct Flaky {
    calls: AtomicU32,
}

impl Transport for Flaky {
    fn send(&self, req: &GenRequest) -> Result<GenResponse, TransportError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if call.is_multiple_of(3) {
            return Err(TransportError::retryable("503 service unavailable"));
        }
        // echo a slightly better answer when shown a previous attempt
        let text = match &req.context.best_excerpt {
            None => "SELECT name FROM users".to_string(),
            Some(best) => format!("{} WHERE active = 1", best.render()),
        };
        Ok(GenResponse { text, usage: TokenUsage { prompt_tokens: 20, completion_tokens: 6 } })
    }
}

fn main() -> iad_core::error::Result<()> {
    let gen = RemoteGenerator::new(Flaky { calls: AtomicU32::new(0) })
        .with_retry(RetryPolicy::no_delay(3))
        .with_system_instruction("Answer with one SQL query.");
    let task = TaskInstance::new("q1", Payload::text("names of active users"))
        .with_reference(Payload::text("SELECT name FROM users WHERE active = 1"));

    let cfg = StrategyConfig::new(StrategyTag::Iad, 3);
    let r = run_strategy(&task, StrategyDeps::new(&gen, &ExactMatchVerifier), &cfg, RunContext::new("remote", "", 0, "q1", StrategyTag::Iad))?;
    for c in &r.candidates {
        println!("iter {} score {} {:?}", c.iteration, c.score, c.response.render());
    }
    println!("generation calls charged: {}, transport requests: {}", r.budget.n_gen_calls, gen.transport.calls.load(Ordering::SeqCst));
    Ok(())
}
