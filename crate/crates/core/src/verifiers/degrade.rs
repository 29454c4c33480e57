use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::VerifierOutcome;
use crate::rng::StreamRng;

/// Verifier feedback granularity. Quantized levels map a score to the
/// midpoint of its uniform bin over [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SparsityLevel {
    /// No sparsity.
    NS,
    /// 10 bins.
    LS,
    /// 3 bins.
    HS,
    /// 2 bins.
    ES,
}

impl SparsityLevel {
    pub const ALL: [SparsityLevel; 4] = [
        SparsityLevel::NS,
        SparsityLevel::LS,
        SparsityLevel::HS,
        SparsityLevel::ES,
    ];

    /// `None` means unquantized.
    pub fn bins(self) -> Option<u32> {
        match self {
            SparsityLevel::NS => None,
            SparsityLevel::LS => Some(10),
            SparsityLevel::HS => Some(3),
            SparsityLevel::ES => Some(2),
        }
    }

    pub fn quantize(self, score: f64) -> f64 {
        match self.bins() {
            None => score,
            Some(b) => {
                let b = f64::from(b);
                let k = (score * b).floor().clamp(0.0, b - 1.0);
                (k + 0.5) / b
            }
        }
    }
}

impl fmt::Display for SparsityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for SparsityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SparsityLevel::ALL
            .into_iter()
            .find(|l| l.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown sparsity level {s:?}"))
    }
}

pub fn sparsify(outcome: VerifierOutcome, level: SparsityLevel) -> VerifierOutcome {
    VerifierOutcome {
        score: level.quantize(outcome.score),
        ..outcome
    }
}

/// Additive zero-mean Gaussian noise on the normalized score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma: 0.0 };

    pub fn new(sigma: f64) -> Option<Self> {
        (sigma.is_finite() && sigma >= 0.0).then_some(NoiseSpec { sigma })
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::NONE
    }
}

/// `clamp(score + eps, 0, 1)` with `eps ~ N(0, sigma^2)`. `sigma == 0`
/// returns the input untouched and consumes no randomness.
pub fn add_noise(outcome: VerifierOutcome, spec: NoiseSpec, rng: &mut StreamRng) -> VerifierOutcome {
    if spec.sigma <= 0.0 {
        return outcome;
    }
    let eps = Normal::new(0.0, spec.sigma)
        .expect("sigma is finite and positive")
        .sample(rng);
    VerifierOutcome {
        score: (outcome.score + eps).clamp(0.0, 1.0),
        ..outcome
    }
}
