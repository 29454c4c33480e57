use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::types::{Payload, TaskInstance};

/// Digest of a candidate's canonical or execution result. Equal keys mean
/// the task family considers the candidates equivalent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EquivalenceKey(pub String);

impl EquivalenceKey {
    pub fn digest(bytes: impl AsRef<[u8]>) -> Self {
        EquivalenceKey(hex::encode(Sha256::digest(bytes.as_ref())))
    }
}

impl fmt::Display for EquivalenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EquivalenceKey {
    fn from(s: &str) -> Self {
        EquivalenceKey(s.to_string())
    }
}

pub trait Equivalence: Send + Sync {
    fn key(&self, task: &TaskInstance, response: &Payload) -> Result<EquivalenceKey>;
}

/// Candidates are equivalent when their trimmed renderings are identical.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactMatchEquivalence;

impl Equivalence for ExactMatchEquivalence {
    fn key(&self, _task: &TaskInstance, response: &Payload) -> Result<EquivalenceKey> {
        Ok(EquivalenceKey::digest(response.render().trim()))
    }
}

/// Equivalence from a closure computing a result to group on, e.g. the rows
/// returned by executing a query.
pub struct FnEquivalence<F>(pub F);

impl<F> Equivalence for FnEquivalence<F>
where
    F: Fn(&TaskInstance, &Payload) -> Result<String> + Send + Sync,
{
    fn key(&self, task: &TaskInstance, response: &Payload) -> Result<EquivalenceKey> {
        (self.0)(task, response).map(EquivalenceKey::digest)
    }
}

/// Index of the first member of the largest bucket. Bucket-size ties go to
/// the bucket whose first member appears earliest.
pub fn majority_choice<K: PartialEq>(keys: &[K]) -> Option<usize> {
    // (first index, size) in order of first appearance
    let mut buckets: Vec<(usize, usize)> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match buckets.iter_mut().find(|(first, _)| keys[*first] == *k) {
            Some(b) => b.1 += 1,
            None => buckets.push((i, 1)),
        }
    }
    let mut best: Option<(usize, usize)> = None;
    for b in buckets {
        if best.is_none_or(|(_, size)| b.1 > size) {
            best = Some(b);
        }
    }
    best.map(|(first, _)| first)
}
