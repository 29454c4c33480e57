use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ConditioningContext, Generation, Generator, SamplingParams};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{BitString, Payload};
use crate::verifiers::parse_wrong_positions;

/// Bitstring stand-in for a black-box model.
///
/// Unconditioned draws perturb the prior mode `m0` bitwise at rate `tau`
/// (the temperature analogue). Conditioned draws copy the incumbent best and
/// flip each bit at rate `mu`, or `mu_directed` where best and worst
/// disagree. Positions named in a critique flip with probability 1/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModelSpec {
    pub length: usize,
    pub prior_mode: BitString,
    pub tau: f64,
    pub mu: f64,
    pub mu_directed: f64,
}

const CRITIQUE_FLIP: f64 = 0.5;

impl SyntheticModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidConfig("length must be positive".into()));
        }
        if self.prior_mode.len() != self.length {
            return Err(Error::InvalidConfig(format!(
                "prior mode has {} bits, expected {}",
                self.prior_mode.len(),
                self.length
            )));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        unit("tau", self.tau)?;
        unit("mu", self.mu)?;
        unit("mu_directed", self.mu_directed)?;
        if self.mu_directed > self.mu {
            return Err(Error::InvalidConfig(format!(
                "mu_directed ({}) must not exceed mu ({})",
                self.mu_directed, self.mu
            )));
        }
        Ok(())
    }

    /// Per-position flip probabilities and the base string they apply to.
    pub fn flip_rates(&self, ctx: &ConditioningContext) -> Result<(BitString, Vec<f64>)> {
        let bits_of = |p: &Payload, what: &str| -> Result<BitString> {
            let b = p
                .as_bits()
                .ok_or_else(|| Error::InvalidContext(format!("{what} excerpt is not a bitstring")))?;
            if b.len() != self.length {
                return Err(Error::InvalidContext(format!(
                    "{what} excerpt has {} bits, expected {}",
                    b.len(),
                    self.length
                )));
            }
            Ok(b.clone())
        };
        let Some(best) = ctx.best_excerpt.as_ref() else {
            return Ok((self.prior_mode.clone(), vec![self.tau; self.length]));
        };
        let best = bits_of(best, "best")?;
        let worst = ctx
            .worst_excerpt
            .as_ref()
            .map(|w| bits_of(w, "worst"))
            .transpose()?;
        let mut rates: Vec<f64> = match &worst {
            None => vec![self.mu; self.length],
            Some(w) => best
                .bits()
                .iter()
                .zip(w.bits())
                .map(|(b, w)| if b == w { self.mu } else { self.mu_directed })
                .collect(),
        };
        if let Some(c) = ctx.critique.as_deref() {
            for p in parse_wrong_positions(c) {
                if p < self.length {
                    rates[p] = CRITIQUE_FLIP;
                }
            }
        }
        Ok((best, rates))
    }
}

/// Draws one bitstring: one uniform per position, in position order.
pub fn synthetic_sample(
    ctx: &ConditioningContext,
    spec: &SyntheticModelSpec,
    rng: &mut StreamRng,
) -> Result<BitString> {
    let (base, rates) = spec.flip_rates(ctx)?;
    Ok(BitString(
        base.bits()
            .iter()
            .zip(rates)
            .map(|(&b, p)| {
                let u: f64 = rng.random();
                if u < p {
                    !b
                } else {
                    b
                }
            })
            .collect(),
    ))
}

#[derive(Clone, Debug)]
pub struct SyntheticGenerator {
    pub spec: SyntheticModelSpec,
}

impl SyntheticGenerator {
    pub fn new(spec: SyntheticModelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SyntheticGenerator { spec })
    }
}

impl Generator for SyntheticGenerator {
    fn generate(
        &self,
        ctx: &ConditioningContext,
        _params: &SamplingParams,
        rng: &mut StreamRng,
    ) -> Result<Generation> {
        let bits = synthetic_sample(ctx, &self.spec, rng)?;
        Ok(Generation {
            tokens: bits.len() as u64,
            payload: Payload::Bits(bits),
        })
    }
}
