//! Active learning of thresholds under censored feedback.
//!
//! A learner proposes a threshold `γ ∈ [0, 1]`; an agent draws a latent value
//! `v ~ F` and the learner observes `b = g(γ, v)` when `v ≥ γ` and `0`
//! otherwise. The crate provides:
//!
//! - [`env`]: value distributions, reward functions, query sessions and an
//!   exact-utility oracle `U(γ) = E[b(γ, v)]`.
//! - [`instances`]: the hard constructions (impossibility family, plateau
//!   base and perturbations, hard families) plus the experiment instances.
//! - [`estimators`]: offline (ε, δ)-estimators on fixed and adaptive grids.
//! - [`online`]: adversarial online learning with EXP3 / Poly INF on a
//!   discretized arm set, with exact regret accounting.
//! - [`analysis`]: empirical CDFs, Hellinger / total-variation distances and
//!   distinguishing bounds.
//! - [`harness`]: config-driven experiments with deterministic CSV output and
//!   the invariant suite behind `threshold-lab verify`.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod env;
mod error;
pub mod estimators;
pub mod harness;
pub mod instances;
pub mod online;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
