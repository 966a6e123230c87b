//! Reward functions `g(γ, v)`, evaluated only where `v ≥ γ`.

use std::fmt;

use serde::Serialize;

/// Class tags of a reward function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RewardClass {
    /// `g(·, v)` weakly increasing in γ for every v.
    pub monotone: bool,
    /// Right-Lipschitz constant in γ, if any.
    pub right_lipschitz: Option<f64>,
    /// Two-sided Lipschitz constant in γ, if any.
    pub lipschitz: Option<f64>,
}

impl RewardClass {
    /// The constant `L` with `g(γ₂,v) − g(γ₁,v) ≤ L(γ₂ − γ₁)`, if tagged.
    pub fn right_constant(&self) -> Option<f64> {
        self.right_lipschitz.or(self.lipschitz)
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.monotone {
            out.push("MONO");
        }
        if self.right_constant().is_some() {
            out.push("RIGHT_LIP");
        }
        if self.lipschitz.is_some() {
            out.push("LIP");
        }
        out
    }
}

pub trait RewardFunction: Send + Sync + fmt::Debug {
    fn evaluate(&self, gamma: f64, value: f64) -> f64;

    fn class(&self) -> RewardClass;

    /// Values of `v` where `g(gamma, ·)` is discontinuous.
    fn value_breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Thresholds where `g(·, v)` jumps.
    fn threshold_breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Whether `g(γ, v) > 0` whenever `v ≥ γ > 0`, so that a zero feedback
    /// at a positive threshold means the value was censored.
    fn censoring_observable(&self) -> bool {
        false
    }
}

/// `g(γ, v) = γ`: posted price.
#[derive(Clone, Copy, Debug, Default)]
pub struct PostedPrice;

impl RewardFunction for PostedPrice {
    fn evaluate(&self, gamma: f64, _value: f64) -> f64 {
        gamma
    }

    fn class(&self) -> RewardClass {
        RewardClass {
            monotone: true,
            right_lipschitz: Some(1.0),
            lipschitz: Some(1.0),
        }
    }

    fn censoring_observable(&self) -> bool {
        true
    }
}

/// `g(γ, v) = γ` below `cut`, `v` at or above it.
#[derive(Clone, Copy, Debug)]
pub struct SwitchToValue {
    pub cut: f64,
}

impl RewardFunction for SwitchToValue {
    fn evaluate(&self, gamma: f64, value: f64) -> f64 {
        if gamma < self.cut {
            gamma
        } else {
            value
        }
    }

    fn class(&self) -> RewardClass {
        RewardClass {
            monotone: true,
            right_lipschitz: None,
            lipschitz: None,
        }
    }

    fn threshold_breakpoints(&self) -> Vec<f64> {
        vec![self.cut]
    }

    fn censoring_observable(&self) -> bool {
        true
    }
}

/// Four-case reward of the impossibility family, monotone in both arguments.
#[derive(Clone, Copy, Debug)]
pub struct ImpossibilityReward {
    pub alpha: f64,
}

impl ImpossibilityReward {
    pub const HIGH_VALUE: f64 = 15.0 / 16.0;
}

impl RewardFunction for ImpossibilityReward {
    fn evaluate(&self, gamma: f64, value: f64) -> f64 {
        let high = value >= Self::HIGH_VALUE;
        match (gamma < self.alpha, high) {
            (true, false) | (false, false) => gamma,
            (true, true) => value - 3.0 / 8.0,
            (false, true) => value,
        }
    }

    fn class(&self) -> RewardClass {
        RewardClass {
            monotone: true,
            right_lipschitz: None,
            lipschitz: None,
        }
    }

    fn value_breakpoints(&self) -> Vec<f64> {
        vec![Self::HIGH_VALUE]
    }

    fn threshold_breakpoints(&self) -> Vec<f64> {
        vec![self.alpha]
    }

    fn censoring_observable(&self) -> bool {
        true
    }
}

/// Grid check of the declared tags; returns a description of each violation.
pub fn check_class(reward: &dyn RewardFunction, points: usize) -> Vec<String> {
    let class = reward.class();
    let mut issues = Vec::new();
    let grid: Vec<f64> = (0..=points).map(|k| k as f64 / points as f64).collect();
    for (j, &v) in grid.iter().enumerate() {
        for i in 0..=j {
            let g1 = reward.evaluate(grid[i], v);
            if !(0.0..=1.0).contains(&g1) {
                issues.push(format!("g({}, {v}) = {g1} outside [0, 1]", grid[i]));
                return issues;
            }
            for &g2x in &grid[i..=j] {
                let g2 = reward.evaluate(g2x, v);
                if class.monotone && g2 < g1 - 1e-12 {
                    issues.push(format!(
                        "MONO violated: g({}, {v}) > g({g2x}, {v})",
                        grid[i]
                    ));
                    return issues;
                }
                if let Some(l) = class.right_constant() {
                    if g2 - g1 > l * (g2x - grid[i]) + 1e-12 {
                        issues.push(format!(
                            "RIGHT_LIP({l}) violated between {} and {g2x} at v={v}",
                            grid[i]
                        ));
                        return issues;
                    }
                }
                if let Some(l) = class.lipschitz {
                    if g1 - g2 > l * (g2x - grid[i]) + 1e-12 {
                        issues.push(format!(
                            "LIP({l}) violated between {} and {g2x} at v={v}",
                            grid[i]
                        ));
                        return issues;
                    }
                }
            }
        }
    }
    issues
}
