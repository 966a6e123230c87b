//! Online threshold learning against an adaptive adversary.
//!
//! The arm set is `{0, ε, 2ε, …}` with `ε = T^{-1/3}`; a finite-armed bandit
//! policy picks an arm each round and sees only the censored feedback.
//! Regret is measured against the best fixed threshold on the arm grid
//! together with a `1e-3` reference grid.

mod bandit;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

pub use bandit::{sample_index, ArmPolicy, Exp3, PolyInf};

use crate::env::{argmax_smallest, uniform_grid, EnvironmentInstance, Threshold, UTILITY_TIE_TOL};
use crate::output::{fmt_float, CsvTable};
use crate::rng::child_rng;
use crate::{Error, Result};

const REFERENCE_STEP: f64 = 1e-3;
const GRID_MERGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    Exp3,
    PolyInf,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Exp3 => "exp3",
            Algorithm::PolyInf => "poly-inf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "exp3" => Ok(Algorithm::Exp3),
            "poly-inf" | "polyinf" => Ok(Algorithm::PolyInf),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OnlineConfig {
    pub horizon: u64,
    pub discretization_eps: f64,
    pub algorithm: Algorithm,
}

impl OnlineConfig {
    /// Default discretization `ε = T^{-1/3}`.
    pub fn new(horizon: u64, algorithm: Algorithm) -> Result<Self> {
        let eps = if horizon == 0 {
            1.0
        } else {
            1.0 / (horizon as f64).cbrt()
        };
        Self::with_eps(horizon, eps, algorithm)
    }

    pub fn with_eps(horizon: u64, discretization_eps: f64, algorithm: Algorithm) -> Result<Self> {
        if !(discretization_eps > 0.0 && discretization_eps <= 1.0) {
            return Err(Error::out_of_range(
                "discretization eps",
                discretization_eps.to_string(),
            ));
        }
        let cfg = OnlineConfig {
            horizon,
            discretization_eps,
            algorithm,
        };
        if horizon > 0 && cfg.arm_count() as u64 > horizon {
            return Err(Error::out_of_range(
                "arm count",
                format!("{} arms exceed T={horizon}", cfg.arm_count()),
            ));
        }
        Ok(cfg)
    }

    /// `{0, ε, …, ⌊1/ε⌋ε}`.
    pub fn arms(&self) -> Vec<f64> {
        uniform_grid(self.discretization_eps, false)
    }

    pub fn arm_count(&self) -> usize {
        self.arms().len()
    }
}

/// Admissible `(reward class, distribution class)` pairs for the adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClassPair {
    /// Right-Lipschitz rewards, any distribution.
    RightLipschitzAll,
    /// Monotone rewards, Lipschitz CDFs.
    MonotoneLipschitzCdf,
}

impl ClassPair {
    pub fn admits(self, instance: &EnvironmentInstance) -> bool {
        let class = instance.reward_class();
        match self {
            ClassPair::RightLipschitzAll => class.right_constant().is_some(),
            ClassPair::MonotoneLipschitzCdf => {
                class.monotone && instance.distribution().cdf_lipschitz().is_some()
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ClassPair::RightLipschitzAll => "(RIGHT_LIP, ALL)",
            ClassPair::MonotoneLipschitzCdf => "(MONO, CDF_LIP)",
        }
    }

    /// The first pair admitting `instance`, if any.
    pub fn of(instance: &EnvironmentInstance) -> Option<Self> {
        [
            ClassPair::RightLipschitzAll,
            ClassPair::MonotoneLipschitzCdf,
        ]
        .into_iter()
        .find(|c| c.admits(instance))
    }
}

/// Chooses the round's instance from the history of `(γ_s, v_s)`.
pub trait Adversary {
    fn class_pair(&self) -> ClassPair;
    fn next(&mut self, round: u64, history: &[(f64, f64)]) -> Arc<EnvironmentInstance>;
}

#[derive(Clone, Debug)]
pub struct FixedAdversary {
    instance: Arc<EnvironmentInstance>,
    class: ClassPair,
}

impl FixedAdversary {
    pub fn new(instance: Arc<EnvironmentInstance>, class: ClassPair) -> Self {
        FixedAdversary { instance, class }
    }

    /// Declares the first admissible class pair of `instance`.
    pub fn auto(instance: Arc<EnvironmentInstance>) -> Result<Self> {
        let class = ClassPair::of(&instance).ok_or_else(|| {
            Error::InvalidInstance(format!("{} fits no online class pair", instance.name()))
        })?;
        Ok(FixedAdversary { instance, class })
    }
}

impl Adversary for FixedAdversary {
    fn class_pair(&self) -> ClassPair {
        self.class
    }

    fn next(&mut self, _round: u64, _history: &[(f64, f64)]) -> Arc<EnvironmentInstance> {
        self.instance.clone()
    }
}

/// Cycles through `instances` by round.
#[derive(Clone, Debug)]
pub struct CyclingAdversary {
    pub instances: Vec<Arc<EnvironmentInstance>>,
    pub class: ClassPair,
}

impl Adversary for CyclingAdversary {
    fn class_pair(&self) -> ClassPair {
        self.class
    }

    fn next(&mut self, round: u64, _history: &[(f64, f64)]) -> Arc<EnvironmentInstance> {
        self.instances[(round as usize) % self.instances.len()].clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub arm: usize,
    pub gamma: f64,
    pub b: f64,
    pub u_exact: f64,
    pub cum_regret_expected: f64,
    pub cum_regret_realized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegretTrace {
    pub horizon: u64,
    pub arms: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Per-round records; empty unless requested.
    pub per_round: Vec<RoundRecord>,
    pub best_fixed_gamma: f64,
    /// `Σ_t U_t(γ)` at the best fixed threshold.
    pub best_fixed_total: f64,
    /// `Σ_t U_t(γ_t)` for the learner.
    pub learner_total: f64,
    pub cumulative_regret: f64,
    pub realized_regret: f64,
    /// Best fixed threshold restricted to the arm grid, and its total.
    pub best_arm_gamma: f64,
    pub best_arm_total: f64,
}

impl RegretTrace {
    pub const HEADER: [&'static str; 7] = [
        "t",
        "arm",
        "gamma",
        "b",
        "U_exact",
        "cum_regret_expected",
        "cum_regret_realized",
    ];

    pub fn rounds_table(&self) -> CsvTable {
        let mut table = CsvTable::new(&Self::HEADER);
        for r in &self.per_round {
            table.push(vec![
                r.t.to_string(),
                r.arm.to_string(),
                fmt_float(r.gamma),
                fmt_float(r.b),
                fmt_float(r.u_exact),
                fmt_float(r.cum_regret_expected),
                fmt_float(r.cum_regret_realized),
            ]);
        }
        table
    }
}

/// Arm grid merged with the `1e-3` reference grid. Returns the grid and the
/// position of each arm in it.
pub fn evaluation_grid(arms: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut all: Vec<f64> = uniform_grid(REFERENCE_STEP, true);
    all.extend_from_slice(arms);
    all.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        if grid.last().is_none_or(|&l| x - l > GRID_MERGE_TOL) {
            grid.push(x);
        }
    }
    let pos = arms
        .iter()
        .map(|&a| {
            grid.iter()
                .position(|&g| (g - a).abs() <= GRID_MERGE_TOL)
                .expect("arm in grid")
        })
        .collect();
    (grid, pos)
}

/// Argmax of `totals` over `grid`, ties to the smaller threshold. With no
/// rounds every threshold totals 0 and the first grid point is returned.
pub fn best_fixed_in_hindsight(totals: &[f64], grid: &[f64], rounds: u64) -> (f64, f64) {
    if grid.is_empty() {
        return (0.0, 0.0);
    }
    let idx = argmax_smallest(totals, UTILITY_TIE_TOL * rounds.max(1) as f64);
    (grid[idx], totals[idx])
}

/// Sum per-round exact utility vectors.
pub fn hindsight_totals(per_round: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = per_round.first() else {
        return Vec::new();
    };
    let mut totals = vec![0.0; first.len()];
    for u in per_round {
        for (s, x) in totals.iter_mut().zip(u) {
            *s += x;
        }
    }
    totals
}

fn utilities_on(instance: &EnvironmentInstance, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&g| instance.exact_utility(Threshold::new(g)?))
        .collect()
}

fn make_policy(config: &OnlineConfig, arms: usize) -> Result<Box<dyn DynPolicy>> {
    Ok(match config.algorithm {
        Algorithm::Exp3 => Box::new(Exp3::tuned(arms, config.horizon)?),
        Algorithm::PolyInf => Box::new(PolyInf::tuned(arms, config.horizon)?),
    })
}

trait DynPolicy {
    fn distribution(&self) -> &[f64];
    fn update(&mut self, arm: usize, reward: f64) -> Result<()>;
}

impl<P: ArmPolicy> DynPolicy for P {
    fn distribution(&self) -> &[f64] {
        ArmPolicy::distribution(self)
    }
    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        ArmPolicy::update(self, arm, reward)
    }
}

/// Play `config.horizon` rounds. The learner and the environment draw from
/// separate child streams of `seed`, and the learner only ever receives
/// `(arm, b_t)`.
pub fn run_online(
    adversary: &mut dyn Adversary,
    config: &OnlineConfig,
    seed: u64,
    record_rounds: bool,
) -> Result<RegretTrace> {
    let arms = config.arms();
    let (grid, arm_pos) = evaluation_grid(&arms);
    let mut policy = make_policy(config, arms.len())?;
    let mut learner_rng = child_rng(seed, 0);
    let mut env_rng = child_rng(seed, 1);
    let class = adversary.class_pair();

    let mut cache: HashMap<*const EnvironmentInstance, (Arc<EnvironmentInstance>, Vec<f64>)> =
        HashMap::new();
    let mut expected_totals = vec![0.0; grid.len()];
    let mut realized_totals = vec![0.0; grid.len()];
    let mut learner_expected = 0.0;
    let mut learner_realized = 0.0;
    let mut history: Vec<(f64, f64)> = Vec::with_capacity(config.horizon as usize);
    let mut per_round = Vec::new();

    for t in 0..config.horizon {
        let arm = sample_index(policy.distribution(), &mut learner_rng);
        let gamma = arms[arm];
        let instance = adversary.next(t, &history);
        if !class.admits(&instance) {
            return Err(Error::ClassViolation {
                round: t,
                instance: instance.name().to_string(),
                class: class.label().to_string(),
            });
        }
        let key = Arc::as_ptr(&instance);
        if let Entry::Vacant(slot) = cache.entry(key) {
            slot.insert((instance.clone(), utilities_on(&instance, &grid)?));
        }
        let utilities = &cache[&key].1;

        let v = instance.distribution().sample(&mut env_rng);
        let b = instance.realize(gamma, v);
        policy.update(arm, b)?;
        history.push((gamma, v));

        for (s, u) in expected_totals.iter_mut().zip(utilities) {
            *s += u;
        }
        let reachable = grid.partition_point(|&g| g <= v);
        for (s, &g) in realized_totals[..reachable]
            .iter_mut()
            .zip(&grid[..reachable])
        {
            *s += instance.realize(g, v);
        }
        let u_t = utilities[arm_pos[arm]];
        learner_expected += u_t;
        learner_realized += b;

        if record_rounds {
            let best_e = expected_totals
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let best_r = realized_totals
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            per_round.push(RoundRecord {
                t: t + 1,
                arm,
                gamma,
                b,
                u_exact: u_t,
                cum_regret_expected: best_e - learner_expected,
                cum_regret_realized: best_r - learner_realized,
            });
        }
    }

    let (best_fixed_gamma, best_fixed_total) =
        best_fixed_in_hindsight(&expected_totals, &grid, config.horizon);
    let arm_totals: Vec<f64> = arm_pos.iter().map(|&p| expected_totals[p]).collect();
    let (best_arm_gamma, best_arm_total) =
        best_fixed_in_hindsight(&arm_totals, &arms, config.horizon);
    let best_realized = realized_totals.iter().copied().fold(0.0, f64::max);
    Ok(RegretTrace {
        horizon: config.horizon,
        arms: arms.len(),
        algorithm: config.algorithm,
        seed,
        per_round,
        best_fixed_gamma,
        best_fixed_total,
        learner_total: learner_expected,
        cumulative_regret: best_fixed_total - learner_expected,
        realized_regret: best_realized - learner_realized,
        best_arm_gamma,
        best_arm_total,
    })
}
