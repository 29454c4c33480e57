//! Verifier-guided iterative decoding (IAD) for black-box generators.
//!
//! A generator proposes responses, a verifier scores them, and a strategy
//! decides what to generate next. The crate ships single-turn, Best-of-N,
//! Best-of-N with self-consistency, IAD and IAD with judge feedback, plus a
//! synthetic bitstring generator/verifier pair whose outcome space is small
//! enough to enumerate.

pub mod budget;
pub mod error;
pub mod generators;
pub mod harness;
pub mod ledger;
pub mod metrics;
pub mod rng;
pub mod strategies;
pub mod types;
pub mod verifiers;

pub use error::{Error, Result};
