//! The censored-feedback environment.
//!
//! A query at threshold `γ` draws a fresh `v ~ F` and reveals only
//! `b(γ, v) = g(γ, v)·1{v ≥ γ}`. [`EnvironmentInstance::exact_utility`] is the
//! ground-truth `U(γ) = E[b(γ, v)]` used by every check in the crate.

mod distribution;
pub(crate) mod quadrature;
mod reward;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

pub use distribution::{linear_fraction, Atom, Piece, Shape, ValueDistribution};
pub use reward::{
    check_class, ImpossibilityReward, PostedPrice, RewardClass, RewardFunction, SwitchToValue,
};

use crate::{Error, Result};

const QUADRATURE_TOL: f64 = 1e-12;
/// Utilities within this distance are treated as tied (smaller γ wins).
pub const UTILITY_TIE_TOL: f64 = 1e-10;

/// A threshold in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Threshold(value))
        } else {
            Err(Error::out_of_range("threshold", value.to_string()))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A latent value in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Value(f64);

impl Value {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Observed reward `b ∈ [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct Feedback(f64);

impl Feedback {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// How an instance's exact feedback distribution at `γ` is obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeedbackSupport {
    Undeclared,
    /// `g(γ, v) = γ`: feedback is `0` or `γ`.
    PostedPrice,
    /// Impossibility family: feedback in `{0, γ, 5/8, 1}`.
    Impossibility {
        alpha: f64,
    },
}

/// A `(g, F)` pair. Immutable once built; share it through `Arc`.
#[derive(Clone, Debug)]
pub struct EnvironmentInstance {
    name: String,
    reward: Arc<dyn RewardFunction>,
    distribution: ValueDistribution,
    support: FeedbackSupport,
}

impl EnvironmentInstance {
    /// Build an instance, checking the distribution and the reward's declared
    /// class tags on a grid.
    pub fn new(
        name: impl Into<String>,
        reward: Arc<dyn RewardFunction>,
        distribution: ValueDistribution,
        support: FeedbackSupport,
    ) -> Result<Self> {
        let name = name.into();
        let mut issues = distribution.validate();
        issues.extend(check_class(reward.as_ref(), 60));
        if !issues.is_empty() {
            return Err(Error::InvalidInstance(format!(
                "{name}: {}",
                issues.join("; ")
            )));
        }
        Ok(Self::new_unchecked(name, reward, distribution, support))
    }

    pub fn new_unchecked(
        name: impl Into<String>,
        reward: Arc<dyn RewardFunction>,
        distribution: ValueDistribution,
        support: FeedbackSupport,
    ) -> Self {
        EnvironmentInstance {
            name: name.into(),
            reward,
            distribution,
            support,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn reward(&self) -> &dyn RewardFunction {
        self.reward.as_ref()
    }

    pub fn distribution(&self) -> &ValueDistribution {
        &self.distribution
    }

    pub fn support(&self) -> FeedbackSupport {
        self.support
    }

    pub fn reward_class(&self) -> RewardClass {
        self.reward.class()
    }

    /// `b(γ, v)`.
    #[inline]
    pub fn realize(&self, gamma: f64, value: f64) -> f64 {
        if value >= gamma {
            self.reward.evaluate(gamma, value)
        } else {
            0.0
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.distribution.sample(rng)
    }

    /// One censored query. The latent value is consumed and discarded.
    pub fn query<R: Rng + ?Sized>(&self, gamma: Threshold, rng: &mut R) -> Feedback {
        let v = self.draw(rng);
        Feedback(self.realize(gamma.0, v))
    }

    /// `U(γ) = ∫_{[γ,1]} g(γ, v) dF(v)`: atoms summed exactly, continuous
    /// pieces by adaptive Simpson between breakpoints.
    pub fn exact_utility(&self, gamma: Threshold) -> Result<f64> {
        let gamma = gamma.0;
        let mut total: f64 = self
            .distribution
            .atoms()
            .iter()
            .filter(|a| a.location >= gamma)
            .map(|a| a.mass * self.reward.evaluate(gamma, a.location))
            .sum();
        let splits = self.reward.value_breakpoints();
        for piece in self.distribution.pieces() {
            if piece.hi <= gamma {
                continue;
            }
            let lo = piece.lo.max(gamma);
            if piece.density_at(lo).is_none() {
                let mass = piece.mass() - piece.mass_to(lo);
                if mass > 0.0 {
                    return Err(Error::MissingDensity {
                        lo,
                        hi: piece.hi,
                        mass,
                    });
                }
                continue;
            }
            let mut cuts = vec![lo];
            cuts.extend(splits.iter().copied().filter(|&s| s > lo && s < piece.hi));
            cuts.push(piece.hi);
            for w in cuts.windows(2) {
                total += quadrature::adaptive_simpson(
                    |v| self.reward.evaluate(gamma, v) * piece.density_at(v).unwrap_or(0.0),
                    w[0],
                    w[1],
                    QUADRATURE_TOL,
                );
            }
        }
        Ok(total)
    }

    /// Maximize `U` over `{0, step, 2·step, …, 1}` together with every atom,
    /// distribution breakpoint and reward jump. Ties go to the smaller γ.
    pub fn exact_argmax_utility(&self, grid_step: f64) -> Result<(Threshold, f64)> {
        if !(grid_step > 0.0 && grid_step <= 1.0) {
            return Err(Error::out_of_range("grid step", grid_step.to_string()));
        }
        let mut candidates = uniform_grid(grid_step, true);
        candidates.extend(self.distribution.breakpoints());
        candidates.extend(self.reward.threshold_breakpoints());
        candidates.retain(|x| (0.0..=1.0).contains(x));
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let values = candidates
            .iter()
            .map(|&g| self.exact_utility(Threshold(g)))
            .collect::<Result<Vec<_>>>()?;
        let idx = argmax_smallest(&values, UTILITY_TIE_TOL);
        Ok((Threshold(candidates[idx]), values[idx]))
    }
}

/// Index of the maximum; values within `tie_tol` of the running best do not
/// displace it, so earlier (smaller-γ) entries win ties.
pub fn argmax_smallest(values: &[f64], tie_tol: f64) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + tie_tol {
            best = i;
        }
    }
    best
}

/// `{0, step, 2·step, …}` up to 1. Points are computed as `k / n` when
/// `1/step` is an integer `n`, so that e.g. `10/30` is the float nearest 1/3.
/// With `include_one`, 1 is appended when it is not already a grid point.
pub fn uniform_grid(step: f64, include_one: bool) -> Vec<f64> {
    let inv = 1.0 / step;
    let n_round = inv.round();
    let mut pts: Vec<f64> = if (inv - n_round).abs() <= 1e-9 * inv.max(1.0) && n_round >= 1.0 {
        let n = n_round as u64;
        (0..=n).map(|k| k as f64 / n as f64).collect()
    } else {
        let n = (inv + 1e-9).floor() as u64;
        (0..=n)
            .map(|k| k as f64 * step)
            .filter(|&x| x <= 1.0)
            .collect()
    };
    if include_one && pts.last().is_some_and(|&l| l < 1.0 - 1e-12) {
        pts.push(1.0);
    }
    pts
}

/// Record of queries issued through a [`QuerySession`].
#[derive(Clone, Debug, Default)]
pub struct QueryLog {
    seed: u64,
    entries: Vec<(Threshold, Feedback)>,
    recording: bool,
    budget_used: u64,
}

impl QueryLog {
    /// A log that keeps every `(threshold, feedback)` pair.
    pub fn recording(seed: u64) -> Self {
        QueryLog {
            seed,
            entries: Vec::new(),
            recording: true,
            budget_used: 0,
        }
    }

    /// A log that only counts queries.
    pub fn counting(seed: u64) -> Self {
        QueryLog {
            seed,
            entries: Vec::new(),
            recording: false,
            budget_used: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[(Threshold, Feedback)] {
        &self.entries
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn budget_used(&self) -> u64 {
        self.budget_used
    }

    fn push(&mut self, gamma: Threshold, b: Feedback) {
        self.budget_used += 1;
        if self.recording {
            self.entries.push((gamma, b));
        }
    }
}

/// Learner-facing access to an instance: thresholds in, feedback out.
pub struct QuerySession<'a, R> {
    instance: &'a EnvironmentInstance,
    rng: R,
    log: QueryLog,
}

impl<'a, R: Rng> QuerySession<'a, R> {
    pub fn new(instance: &'a EnvironmentInstance, rng: R, log: QueryLog) -> Self {
        QuerySession { instance, rng, log }
    }

    pub fn query(&mut self, gamma: Threshold) -> Feedback {
        let b = self.instance.query(gamma, &mut self.rng);
        self.log.push(gamma, b);
        b
    }

    pub fn log(&self) -> &QueryLog {
        &self.log
    }

    pub fn into_log(self) -> QueryLog {
        self.log
    }

    /// Query that also exposes the latent value. Test builds only.
    #[cfg(test)]
    pub(crate) fn query_exposed(&mut self, gamma: Threshold) -> (Value, Feedback) {
        let v = self.instance.draw(&mut self.rng);
        let b = Feedback(self.instance.realize(gamma.0, v));
        self.log.push(gamma, b);
        (Value(v), b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn posted(dist: ValueDistribution) -> EnvironmentInstance {
        EnvironmentInstance::new(
            "test",
            Arc::new(PostedPrice),
            dist,
            FeedbackSupport::PostedPrice,
        )
        .unwrap()
    }

    fn t(x: f64) -> Threshold {
        Threshold::new(x).unwrap()
    }

    #[test]
    fn threshold_range() {
        assert!(Threshold::new(-0.01).is_err());
        assert!(Threshold::new(1.01).is_err());
        assert!(Threshold::new(f64::NAN).is_err());
        assert_eq!(Threshold::new(1.0).unwrap().get(), 1.0);
    }

    #[test]
    fn point_mass_queries() {
        let inst = posted(ValueDistribution::point_mass(1.0 / 3.0).unwrap());
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            assert_eq!(inst.query(t(0.2), &mut rng).get(), 0.2);
            assert_eq!(inst.query(t(0.5), &mut rng).get(), 0.0);
        }
    }

    #[test]
    fn zero_threshold_zero_utility() {
        let inst = posted(ValueDistribution::uniform(0.0, 1.0).unwrap());
        assert_eq!(inst.exact_utility(t(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_argmax_is_the_atom() {
        let inst = posted(ValueDistribution::point_mass(1.0 / 3.0).unwrap());
        let (g, u) = inst.exact_argmax_utility(1e-4).unwrap();
        assert_eq!(g.get(), 1.0 / 3.0);
        assert!((u - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_rejects_bad_step() {
        let inst = posted(ValueDistribution::uniform(0.0, 1.0).unwrap());
        assert!(inst.exact_argmax_utility(0.0).is_err());
        assert!(inst.exact_argmax_utility(1.5).is_err());
    }

    #[test]
    fn missing_density_propagates() {
        let dist = ValueDistribution::new(
            vec![],
            vec![Piece {
                lo: 0.0,
                hi: 1.0,
                shape: Shape::CdfOnly {
                    mass: 1.0,
                    fraction: linear_fraction,
                },
            }],
            None,
        )
        .unwrap();
        let inst = posted(dist);
        assert!(matches!(
            inst.exact_utility(t(0.5)),
            Err(Error::MissingDensity { .. })
        ));
        assert!(matches!(
            inst.exact_argmax_utility(0.1),
            Err(Error::MissingDensity { .. })
        ));
        // above the piece there is nothing to integrate
        assert_eq!(inst.exact_utility(t(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn censoring_white_box() {
        let inst = posted(ValueDistribution::uniform(0.0, 1.0).unwrap());
        let mut session = QuerySession::new(&inst, rng_from_seed(11), QueryLog::recording(11));
        for k in 0..2000 {
            let gamma = t((k % 100) as f64 / 100.0);
            let (v, b) = session.query_exposed(gamma);
            if v.get() < gamma.get() {
                assert_eq!(b.get(), 0.0);
            } else {
                assert_eq!(b.get(), inst.reward().evaluate(gamma.get(), v.get()));
            }
        }
        assert_eq!(session.log().budget_used(), 2000);
        assert_eq!(session.log().entries().len(), 2000);
    }

    #[test]
    fn counting_log_keeps_no_entries() {
        let inst = posted(ValueDistribution::uniform(0.0, 1.0).unwrap());
        let mut session = QuerySession::new(&inst, rng_from_seed(1), QueryLog::counting(1));
        for _ in 0..10 {
            session.query(t(0.5));
        }
        let log = session.into_log();
        assert_eq!(log.budget_used(), 10);
        assert!(log.entries().is_empty());
        assert_eq!(log.seed(), 1);
    }

    #[test]
    fn uniform_grid_shapes() {
        let g = uniform_grid(0.1, true);
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        let g = uniform_grid(1.0 / 30.0, true);
        assert_eq!(g[10], 1.0 / 3.0);
        let g = uniform_grid(0.3, true);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(uniform_grid(0.3, false).len(), 4);
        assert_eq!(uniform_grid(2.0, true), vec![0.0, 1.0]);
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax_smallest(&[0.1, 0.25, 0.25 + 1e-13, 0.2], 1e-10), 1);
        assert_eq!(argmax_smallest(&[0.3, 0.1], 1e-10), 0);
    }
}
