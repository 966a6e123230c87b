//! Finite-armed adversarial bandit policies with rewards in `[0, 1]`.

use rand::Rng;

use crate::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-10;
const NORMALIZATION_MAX_ITER: usize = 200;

pub trait ArmPolicy {
    fn arms(&self) -> usize;

    /// Current sampling distribution over arms.
    fn distribution(&self) -> &[f64];

    /// Feed back the reward of the arm just played.
    fn update(&mut self, arm: usize, reward: f64) -> Result<()>;

    fn sample_arm<R: Rng + ?Sized>(&self, rng: &mut R) -> usize
    where
        Self: Sized,
    {
        sample_index(self.distribution(), rng)
    }
}

pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn check_reward(arm: usize, arms: usize, reward: f64) -> Result<()> {
    if arm >= arms {
        return Err(Error::out_of_range("arm", format!("{arm} >= {arms}")));
    }
    if !(0.0..=1.0).contains(&reward) {
        return Err(Error::out_of_range("reward", reward.to_string()));
    }
    Ok(())
}

/// EXP3 with uniform exploration mixing.
#[derive(Clone, Debug)]
pub struct Exp3 {
    eta: f64,
    explore: f64,
    log_weights: Vec<f64>,
    probs: Vec<f64>,
}

impl Exp3 {
    pub fn new(arms: usize, eta: f64, explore: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::out_of_range("arms", "0"));
        }
        if !(eta > 0.0) || !(0.0..=1.0).contains(&explore) {
            return Err(Error::out_of_range(
                "EXP3 parameters",
                format!("eta={eta}, explore={explore}"),
            ));
        }
        Ok(Exp3 {
            eta,
            explore,
            log_weights: vec![0.0; arms],
            probs: vec![1.0 / arms as f64; arms],
        })
    }

    /// `η = √(2 ln K / (T K))`, exploration `min(1, K η)`.
    pub fn tuned(arms: usize, horizon: u64) -> Result<Self> {
        let k = arms as f64;
        let eta = if arms > 1 {
            (2.0 * k.ln() / (horizon.max(1) as f64 * k)).sqrt()
        } else {
            1.0
        };
        Self::new(arms, eta, (k * eta).min(1.0))
    }

    pub fn exploration_floor(&self) -> f64 {
        self.explore / self.arms() as f64
    }

    fn refresh(&mut self) {
        let k = self.arms() as f64;
        let top = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = self.log_weights.iter().map(|&l| (l - top).exp()).sum();
        for (p, &l) in self.probs.iter_mut().zip(&self.log_weights) {
            *p = (1.0 - self.explore) * (l - top).exp() / total + self.explore / k;
        }
    }
}

impl ArmPolicy for Exp3 {
    fn arms(&self) -> usize {
        self.log_weights.len()
    }

    fn distribution(&self) -> &[f64] {
        &self.probs
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_reward(arm, self.arms(), reward)?;
        if reward > 0.0 {
            self.log_weights[arm] += self.eta * reward / self.probs[arm];
            self.refresh();
        }
        Ok(())
    }
}

/// Implicitly normalized forecaster with `ψ(x) = (η/(−x))^q + γ/K`.
#[derive(Clone, Debug)]
pub struct PolyInf {
    q: f64,
    eta: f64,
    gamma: f64,
    gains: Vec<f64>,
    probs: Vec<f64>,
}

impl PolyInf {
    pub fn new(arms: usize, q: f64, eta: f64, gamma: f64) -> Result<Self> {
        if arms == 0 {
            return Err(Error::out_of_range("arms", "0"));
        }
        if !(q > 1.0 && eta > 0.0 && (0.0..1.0).contains(&gamma)) {
            return Err(Error::out_of_range(
                "Poly INF parameters",
                format!("q={q}, eta={eta}, gamma={gamma}"),
            ));
        }
        Ok(PolyInf {
            q,
            eta,
            gamma,
            gains: vec![0.0; arms],
            probs: vec![1.0 / arms as f64; arms],
        })
    }

    /// `q = 2`, `η = √(5T)`, `γ = min(1/2, √(3K/T))`.
    pub fn tuned(arms: usize, horizon: u64) -> Result<Self> {
        let t = horizon.max(1) as f64;
        let gamma = (3.0 * arms as f64 / t).sqrt().min(0.5);
        Self::new(arms, 2.0, (5.0 * t).sqrt(), gamma)
    }

    /// Solve `Σ (η/(C − V_i))^q = 1 − γ` for `C > max V` by Newton steps
    /// kept inside a shrinking bracket.
    fn normalize(&mut self) -> Result<()> {
        let k = self.arms() as f64;
        let target = 1.0 - self.gamma;
        let top = self.gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // shifted so that max V = 0; the root c lies in [lo, hi]
        let gaps: Vec<f64> = self.gains.iter().map(|&v| top - v).collect();
        let mut lo = self.eta * target.powf(-1.0 / self.q);
        let mut hi = self.eta * (k / target).powf(1.0 / self.q);
        let eval = |c: f64| -> (f64, f64) {
            let mut s = 0.0;
            let mut ds = 0.0;
            for &g in &gaps {
                let term = (self.eta / (c + g)).powf(self.q);
                s += term;
                ds -= self.q * term / (c + g);
            }
            (s - target, ds)
        };
        let mut c = lo;
        let mut residual = f64::INFINITY;
        for _ in 0..NORMALIZATION_MAX_ITER {
            let (r, dr) = eval(c);
            residual = r;
            if r.abs() <= NORMALIZATION_TOL {
                let mut probs: Vec<f64> = gaps
                    .iter()
                    .map(|&g| (self.eta / (c + g)).powf(self.q) + self.gamma / k)
                    .collect();
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                self.probs = probs;
                return Ok(());
            }
            // the sum decreases in c
            if r > 0.0 {
                lo = c;
            } else {
                hi = c;
            }
            let newton = c - r / dr;
            c = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::NormalizationFailure {
            iterations: NORMALIZATION_MAX_ITER,
            residual,
        })
    }
}

impl ArmPolicy for PolyInf {
    fn arms(&self) -> usize {
        self.gains.len()
    }

    fn distribution(&self) -> &[f64] {
        &self.probs
    }

    fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        check_reward(arm, self.arms(), reward)?;
        if reward > 0.0 {
            self.gains[arm] += reward / self.probs[arm];
        }
        self.normalize()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn run_two_arm(policy: &mut impl ArmPolicy, rounds: usize, reward_of: impl Fn(usize) -> f64) {
        let mut rng = rng_from_seed(17);
        for _ in 0..rounds {
            let arm = policy.sample_arm(&mut rng);
            policy.update(arm, reward_of(arm)).unwrap();
            let s: f64 = policy.distribution().iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exp3_symmetric_under_zero_rewards() {
        let mut p = Exp3::tuned(2, 10_000).unwrap();
        run_two_arm(&mut p, 1000, |_| 0.0);
        assert_eq!(p.distribution(), &[0.5, 0.5]);
    }

    #[test]
    fn exp3_finds_better_arm() {
        let mut p = Exp3::tuned(2, 10_000).unwrap();
        run_two_arm(&mut p, 10_000, |a| if a == 0 { 1.0 } else { 0.0 });
        assert!(p.distribution()[0] > 0.9);
        assert!(p
            .distribution()
            .iter()
            .all(|&q| q >= p.exploration_floor() - 1e-15));
    }

    #[test]
    fn poly_inf_symmetric_under_zero_rewards() {
        let mut p = PolyInf::tuned(2, 10_000).unwrap();
        run_two_arm(&mut p, 1000, |_| 0.0);
        for &q in p.distribution() {
            assert!((q - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn poly_inf_finds_better_arm() {
        let mut p = PolyInf::tuned(2, 10_000).unwrap();
        run_two_arm(&mut p, 10_000, |a| if a == 0 { 1.0 } else { 0.0 });
        assert!(p.distribution()[0] > 0.9);
    }

    #[test]
    fn poly_inf_many_arms_normalizes() {
        let mut p = PolyInf::tuned(47, 100_000).unwrap();
        let mut rng = rng_from_seed(3);
        for t in 0..5000 {
            let arm = p.sample_arm(&mut rng);
            p.update(arm, ((arm * 7 + t) % 11) as f64 / 10.0).unwrap();
        }
        let s: f64 = p.distribution().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(p.distribution().iter().all(|&q| q > 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = Exp3::tuned(3, 100).unwrap();
        assert!(p.update(3, 0.5).is_err());
        assert!(p.update(0, 1.5).is_err());
        assert!(PolyInf::new(2, 2.0, 1.0, 1.0).is_err());
    }
}
