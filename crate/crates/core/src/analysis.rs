//! Empirical CDFs, Hellinger / total-variation distances and the
//! distinguishing bounds used by the lower-bound constructions.

use rand::Rng;
use serde::Serialize;

use crate::env::{EnvironmentInstance, QueryLog, QuerySession, Threshold};
use crate::instances::feedback_pmf;
use crate::{Error, Result};

const MERGE_TOL: f64 = 1e-12;
const PROB_SUM_TOL: f64 = 1e-12;

/// Finite-support distribution; support sorted and distinct.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Build from `(value, probability)` pairs. Values closer than 1e-12
    /// are merged; probabilities must be nonnegative and sum to 1.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.iter().any(|&(x, p)| !x.is_finite() || !(p >= 0.0)) {
            return Err(Error::out_of_range(
                "discrete distribution",
                "non-finite value or negative probability",
            ));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            match support.last() {
                Some(&last) if (x - last).abs() <= MERGE_TOL => *probs.last_mut().unwrap() += p,
                _ => {
                    support.push(x);
                    probs.push(p);
                }
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::out_of_range(
                "discrete distribution",
                format!("probabilities sum to {total}"),
            ));
        }
        Ok(DiscreteDistribution { support, probs })
    }

    /// Two-point distribution `{0: 1 − p, 1: p}`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new([(0.0, 1.0 - p), (1.0, p)])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `x` (0 off the support).
    pub fn prob(&self, x: f64) -> f64 {
        self.support
            .iter()
            .position(|&s| (s - x).abs() <= MERGE_TOL)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(&x, &p)| p * h(x))
            .sum()
    }
}

/// Probabilities of both distributions on the merged support.
fn aligned(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> Vec<(f64, f64)> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(d1.support.len() + d2.support.len());
    while i < d1.support.len() || j < d2.support.len() {
        match (d1.support.get(i), d2.support.get(j)) {
            (Some(&a), Some(&b)) if (a - b).abs() <= MERGE_TOL => {
                out.push((d1.probs[i], d2.probs[j]));
                i += 1;
                j += 1;
            }
            (Some(&a), Some(&b)) if a < b => {
                out.push((d1.probs[i], 0.0));
                i += 1;
            }
            (Some(_), None) => {
                out.push((d1.probs[i], 0.0));
                i += 1;
            }
            _ => {
                out.push((0.0, d2.probs[j]));
                j += 1;
            }
        }
    }
    out
}

/// `d²_H = ½ Σ (√p − √q)²` on the union support.
pub fn hellinger_sq(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> f64 {
    let s: f64 = aligned(d1, d2)
        .iter()
        .map(|&(p, q)| (p.sqrt() - q.sqrt()).powi(2))
        .sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// `d_TV = ½ Σ |p − q|`.
pub fn tv_distance(d1: &DiscreteDistribution, d2: &DiscreteDistribution) -> f64 {
    let s: f64 = aligned(d1, d2).iter().map(|&(p, q)| (p - q).abs()).sum();
    (0.5 * s).clamp(0.0, 1.0)
}

/// Squared Hellinger distance between `m`-fold products:
/// `1 − (1 − d²_H)^m`, which never exceeds `m·d²_H`.
pub fn product_hellinger_sq(d2h: f64, m: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&d2h) {
        return Err(Error::out_of_range(
            "squared Hellinger distance",
            d2h.to_string(),
        ));
    }
    // 1 − (1 − x)^m without cancellation for small x
    let value = -((m as f64) * (-d2h).ln_1p()).exp_m1();
    debug_assert!(value <= m as f64 * d2h + 1e-15);
    Ok(value)
}

/// Samples needed to tell two distributions apart with error at most `delta`:
/// `⌈ln(1/(4δ)) / (4·d²_H)⌉`, at least 1. Needs `d²_H ≤ 1/2` and `δ < 1/4`.
pub fn distinguish_sample_lb(d2h: f64, delta: f64) -> Result<u64> {
    if !(d2h > 0.0 && d2h <= 0.5) {
        return Err(Error::out_of_range(
            "squared Hellinger distance",
            format!("{d2h} not in (0, 1/2]"),
        ));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::out_of_range(
            "delta",
            format!("{delta} not in (0, 1/4)"),
        ));
    }
    let m = ((1.0 / (4.0 * delta)).ln() / (4.0 * d2h)).ceil();
    Ok(m.max(1.0) as u64)
}

/// Exact distribution of the feedback `b(γ, v)`.
pub fn feedback_distribution(
    instance: &EnvironmentInstance,
    gamma: Threshold,
) -> Result<DiscreteDistribution> {
    DiscreteDistribution::new(feedback_pmf(instance, gamma)?)
}

/// Empirical error rate of the likelihood-ratio test between two instances
/// from `m` queries at `γ`, over `trials` trials with a uniformly chosen
/// truth. Ties are broken by a fair coin.
pub fn monte_carlo_distinguisher<R: Rng>(
    a: &EnvironmentInstance,
    b: &EnvironmentInstance,
    gamma: Threshold,
    m: u64,
    trials: u64,
    rng: &mut R,
) -> Result<f64> {
    let da = feedback_distribution(a, gamma)?;
    let db = feedback_distribution(b, gamma)?;
    let log_ratio = |x: f64| {
        let (pa, pb) = (da.prob(x), db.prob(x));
        match (pa > 0.0, pb > 0.0) {
            (true, true) => pa.ln() - pb.ln(),
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => 0.0,
        }
    };
    let mut errors = 0u64;
    for _ in 0..trials {
        let truth_is_a = rng.gen::<bool>();
        let inst = if truth_is_a { a } else { b };
        let mut session = QuerySession::new(inst, &mut *rng, QueryLog::counting(0));
        let mut llr = 0.0;
        for _ in 0..m {
            llr += log_ratio(session.query(gamma).get());
        }
        let guess_a = if llr > 0.0 {
            true
        } else if llr < 0.0 {
            false
        } else {
            rng.gen::<bool>()
        };
        if guess_a != truth_is_a {
            errors += 1;
        }
    }
    Ok(errors as f64 / trials as f64)
}

/// Step-function CDF of a sample: `Ĝ(x) = #{b_i ≤ x} / n`.
#[derive(Clone, Debug)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::out_of_range("empirical CDF", "no samples"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::out_of_range("empirical CDF", "NaN sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: samples })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.n() as f64
    }

    /// `∫_lo^hi (1 − Ĝ(t)) dt`, exact for the step function.
    pub fn survival_integral(&self, lo: f64, hi: f64) -> f64 {
        let n = self.n() as f64;
        let mut total = 0.0;
        let mut prev = lo;
        let mut count = self.sorted.partition_point(|&s| s <= lo);
        while prev < hi {
            let next = self.sorted.get(count).map_or(hi, |&s| s.min(hi));
            total += (next - prev) * (1.0 - count as f64 / n);
            prev = next;
            count = self.sorted.partition_point(|&s| s <= next);
        }
        total
    }

    /// `sup_x |Ĝ(x) − F(x)|` against a continuous CDF, checked on both sides
    /// of every jump.
    pub fn sup_deviation(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.n() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                let above = (i + 1) as f64 / n - f;
                let below = f - i as f64 / n;
                above.max(below)
            })
            .fold(0.0, f64::max)
    }
}

/// Radius `ε` for which `P(sup |Ĝ − F| > ε) ≤ δ` with `n` samples.
pub fn dkw_band_radius(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// `2·exp(−2nε²)`.
pub fn dkw_failure_bound(n: usize, eps: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * eps * eps).exp()
}
