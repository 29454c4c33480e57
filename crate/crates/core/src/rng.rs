//! Labeled random sub-streams.
//!
//! Every run draws from three independent streams keyed by
//! `(seed, task_id, strategy_tag, stream)`. The key is hashed with SHA-256
//! into a ChaCha seed, so adding a strategy or a task never shifts the draws
//! of any other run.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::types::StrategyTag;

pub type StreamRng = ChaCha12Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Gen,
    Verifier,
    Noise,
}

impl Stream {
    fn label(self) -> &'static str {
        match self {
            Stream::Gen => "gen",
            Stream::Verifier => "verifier",
            Stream::Noise => "noise",
        }
    }
}

const DOMAIN: &[u8] = b"iad-core/rng/v1";

pub fn derive_rng(seed: u64, task_id: &str, strategy_tag: StrategyTag, stream: Stream) -> StreamRng {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(seed.to_le_bytes());
    // length prefixes keep ("ab","c") and ("a","bc") apart
    for part in [task_id.as_bytes(), strategy_tag.as_str().as_bytes(), stream.label().as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    StreamRng::from_seed(h.finalize().into())
}

/// Stream for constructing a task instance (hidden reference, prior mode),
/// independent of every run stream.
pub fn task_rng(task_seed: u64, task_id: &str) -> StreamRng {
    let mut h = Sha256::new();
    h.update(b"iad-core/task/v1");
    h.update(task_seed.to_le_bytes());
    h.update((task_id.len() as u64).to_le_bytes());
    h.update(task_id.as_bytes());
    StreamRng::from_seed(h.finalize().into())
}

/// The three streams consumed by one strategy run.
#[derive(Clone, Debug)]
pub struct RunStreams {
    pub gen: StreamRng,
    pub verifier: StreamRng,
    pub noise: StreamRng,
}

impl RunStreams {
    pub fn derive(seed: u64, task_id: &str, strategy_tag: StrategyTag) -> Self {
        RunStreams {
            gen: derive_rng(seed, task_id, strategy_tag, Stream::Gen),
            verifier: derive_rng(seed, task_id, strategy_tag, Stream::Verifier),
            noise: derive_rng(seed, task_id, strategy_tag, Stream::Noise),
        }
    }
}
