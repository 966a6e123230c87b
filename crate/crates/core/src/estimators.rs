//! Offline (ε, δ)-estimators.
//!
//! [`grid_estimate`] queries every multiple of `ε/L` with a DKW-sized batch and
//! returns the empirical argmax. [`adaptive_grid_estimate`] does not need `L`:
//! it places grid points so that consecutive estimated CDF values differ by
//! about `2ε/3`, reading the CDF off the fraction of censored queries.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::env::{
    argmax_smallest, uniform_grid, EnvironmentInstance, QueryLog, QuerySession, Threshold,
};
use crate::output::fmt_float;
use crate::rng::child_rng;
use crate::{Error, Result};

const ARGMAX_TIE_TOL: f64 = 0.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AccuracyParams {
    pub eps: f64,
    pub delta: f64,
}

impl AccuracyParams {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::out_of_range("eps", eps.to_string()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::out_of_range("delta", delta.to_string()));
        }
        Ok(AccuracyParams { eps, delta })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub points: Vec<f64>,
    pub step: Option<f64>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `Γ`: every multiple of `ε/L` in `[0, 1]`, plus 1 when it is not one.
pub fn fixed_grid(eps: f64, lipschitz: f64) -> Result<Grid> {
    if !(eps > 0.0) || !(lipschitz > 0.0) {
        return Err(Error::out_of_range(
            "grid step",
            format!("eps={eps}, L={lipschitz}"),
        ));
    }
    let step = eps / lipschitz;
    if step >= 1.0 {
        return Ok(Grid {
            points: vec![0.0, 1.0],
            step: Some(step),
        });
    }
    Ok(Grid {
        points: uniform_grid(step, true),
        step: Some(step),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UtilityEstimate {
    pub gamma: f64,
    pub u_hat: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub gamma_hat: f64,
    pub u_hat_at_gamma_hat: f64,
    pub per_point: Vec<UtilityEstimate>,
    /// Every query issued, including the grid-construction ones.
    pub queries_used: u64,
    /// Queries spent building the grid (adaptive estimator only).
    pub grid_queries: u64,
    pub guarantee: AccuracyParams,
    pub tag_warning: Option<String>,
}

impl EstimatorReport {
    pub fn grid(&self) -> Vec<f64> {
        self.per_point.iter().map(|p| p.gamma).collect()
    }

    /// One CSV row, scored against the exact utility.
    pub fn score(
        &self,
        instance: &EnvironmentInstance,
        seed: u64,
        argmax_step: f64,
    ) -> Result<ScoredRun> {
        let u_exact = instance.exact_utility(Threshold::new(self.gamma_hat)?)?;
        let (_, u_star) = instance.exact_argmax_utility(argmax_step)?;
        Ok(ScoredRun {
            instance: instance.name().to_string(),
            eps: self.guarantee.eps,
            delta: self.guarantee.delta,
            seed,
            gamma_hat: self.gamma_hat,
            u_hat: self.u_hat_at_gamma_hat,
            u_exact_at_gamma_hat: u_exact,
            u_star,
            queries_used: self.queries_used,
            success_3eps: u_exact >= u_star - 3.0 * self.guarantee.eps,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoredRun {
    pub instance: String,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub gamma_hat: f64,
    pub u_hat: f64,
    pub u_exact_at_gamma_hat: f64,
    pub u_star: f64,
    pub queries_used: u64,
    pub success_3eps: bool,
}

impl ScoredRun {
    pub const HEADER: [&'static str; 10] = [
        "instance",
        "eps",
        "delta",
        "seed",
        "gamma_hat",
        "u_hat",
        "u_exact_at_gamma_hat",
        "u_star",
        "queries_used",
        "success_3eps",
    ];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.instance.clone(),
            fmt_float(self.eps),
            fmt_float(self.delta),
            self.seed.to_string(),
            fmt_float(self.gamma_hat),
            fmt_float(self.u_hat),
            fmt_float(self.u_exact_at_gamma_hat),
            fmt_float(self.u_star),
            self.queries_used.to_string(),
            self.success_3eps.to_string(),
        ]
    }
}

/// Smallest `m` with `2·exp(−2mε²) ≤ δ`, i.e. `⌈ln(2/δ) / (2ε²)⌉`.
pub fn dkw_sample_size(eps: f64, delta: f64) -> Result<u64> {
    AccuracyParams::new(eps, delta)?;
    let raw = (2.0 / delta).ln() / (2.0 * eps * eps);
    let mut m = raw.ceil().max(1.0);
    // ceil can overshoot by one when raw is an integer up to rounding
    if m > 1.0 && 2.0 * (-2.0 * (m - 1.0) * eps * eps).exp() <= delta * (1.0 + 1e-12) {
        m -= 1.0;
    }
    Ok(m as u64)
}

/// Mean of `m` feedbacks at `gamma`.
pub fn estimate_utility_at<R: Rng + ?Sized>(
    instance: &EnvironmentInstance,
    gamma: Threshold,
    m: u64,
    rng: &mut R,
) -> Result<UtilityEstimate> {
    if m == 0 {
        return Err(Error::out_of_range("sample count", "m must be at least 1"));
    }
    let mut session = QuerySession::new(instance, rng, QueryLog::counting(0));
    // Neumaier summation keeps long batches of equal feedback exact
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for _ in 0..m {
        let x = session.query(gamma).get();
        let t = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    Ok(UtilityEstimate {
        gamma: gamma.get(),
        u_hat: (sum + carry) / m as f64,
        samples: m,
    })
}

/// Fraction of censored (zero) feedbacks among `m` queries at `x`.
fn estimate_cdf_at<R: Rng + ?Sized>(
    instance: &EnvironmentInstance,
    x: f64,
    m: u64,
    rng: &mut R,
) -> Result<f64> {
    let gamma = Threshold::new(x)?;
    let mut session = QuerySession::new(instance, rng, QueryLog::counting(0));
    let zeros = (0..m).filter(|_| session.query(gamma).get() == 0.0).count();
    Ok(zeros as f64 / m as f64)
}

/// Lipschitz constant usable by [`grid_estimate`]: the reward's
/// right-Lipschitz constant, else the CDF constant of a monotone reward.
pub fn natural_lipschitz(instance: &EnvironmentInstance) -> Option<f64> {
    let class = instance.reward_class();
    class.right_constant().or_else(|| {
        if class.monotone {
            instance.distribution().cdf_lipschitz()
        } else {
            None
        }
    })
}

fn tag_check(instance: &EnvironmentInstance, lipschitz: f64) -> Option<Error> {
    let class = instance.reward_class();
    let right_ok = class
        .right_constant()
        .is_some_and(|l| l <= lipschitz + 1e-12);
    let mono_ok = class.monotone
        && instance
            .distribution()
            .cdf_lipschitz()
            .is_some_and(|l| l <= lipschitz + 1e-12);
    if right_ok || mono_ok {
        None
    } else {
        Some(Error::TagMismatch {
            instance: instance.name().to_string(),
            required: format!("RIGHT_LIP({lipschitz}) or MONO with CDF_LIP({lipschitz})"),
        })
    }
}

fn estimate_grid<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    points: &[f64],
    m: u64,
    rng: &mut R,
) -> Result<Vec<UtilityEstimate>> {
    let base = rng.next_u64();
    points
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            estimate_utility_at(
                instance,
                Threshold::new(g)?,
                m,
                &mut child_rng(base, i as u64),
            )
        })
        .collect()
}

fn pick(per_point: Vec<UtilityEstimate>) -> (f64, f64, Vec<UtilityEstimate>) {
    let values: Vec<f64> = per_point.iter().map(|p| p.u_hat).collect();
    let best = argmax_smallest(&values, ARGMAX_TIE_TOL);
    (per_point[best].gamma, per_point[best].u_hat, per_point)
}

/// Fixed-grid estimator with `m = dkw_sample_size(ε, δ/|Γ|)` queries per point.
/// A missing class tag is logged and reported, and the run goes ahead.
pub fn grid_estimate<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    params: AccuracyParams,
    lipschitz: f64,
    rng: &mut R,
) -> Result<EstimatorReport> {
    let params = AccuracyParams::new(params.eps, params.delta)?;
    let grid = fixed_grid(params.eps, lipschitz)?;
    let m = dkw_sample_size(params.eps, params.delta / grid.len() as f64)?;
    grid_estimate_with_m(instance, params, lipschitz, m, rng)
}

/// Fixed-grid estimator with an explicit per-point batch size.
pub fn grid_estimate_with_m<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    params: AccuracyParams,
    lipschitz: f64,
    m: u64,
    rng: &mut R,
) -> Result<EstimatorReport> {
    let params = AccuracyParams::new(params.eps, params.delta)?;
    let tag_warning = tag_check(instance, lipschitz).map(|e| {
        log::warn!("{e}; running anyway");
        e.to_string()
    });
    let grid = fixed_grid(params.eps, lipschitz)?;
    let mut report = estimate_on_points(instance, &grid.points, m, params, rng)?;
    report.tag_warning = tag_warning;
    Ok(report)
}

/// `m` queries at each of `points`, then the empirical argmax.
pub fn estimate_on_points<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    points: &[f64],
    m: u64,
    params: AccuracyParams,
    rng: &mut R,
) -> Result<EstimatorReport> {
    if points.is_empty() {
        return Err(Error::out_of_range("grid", "no points"));
    }
    let per_point = estimate_grid(instance, points, m, rng)?;
    let queries_used = per_point.iter().map(|p| p.samples).sum();
    let (gamma_hat, u_hat, per_point) = pick(per_point);
    Ok(EstimatorReport {
        gamma_hat,
        u_hat_at_gamma_hat: u_hat,
        per_point,
        queries_used,
        grid_queries: 0,
        guarantee: params,
        tag_warning: None,
    })
}

/// Probes allowed per grid step of the adaptive search.
pub fn adaptive_probe_budget(eps: f64) -> u64 {
    (1.0 / eps).log2().ceil().max(0.0) as u64 + 12
}

/// Cap on the number of interior points of the adaptive grid.
pub fn adaptive_max_steps(eps: f64) -> u64 {
    (3.0 / eps).ceil() as u64 + 2
}

/// Grid built by the adaptive estimator, with its CDF estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdaptiveGrid {
    pub points: Vec<f64>,
    pub cdf_hat: Vec<f64>,
    /// Points accepted with an estimated gap inside the target window.
    pub in_window: Vec<bool>,
    pub probes: u64,
    pub queries: u64,
}

/// Build `Γ_A` from 0: each next point is found by galloping then bisecting
/// until the estimated CDF gap to the previous point lies in `(5ε/9, 7ε/9)`.
/// The grid closes with 1 once the estimated mass left is at most `7ε/9`.
pub fn build_adaptive_grid<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    params: AccuracyParams,
    rng: &mut R,
) -> Result<AdaptiveGrid> {
    if !instance.reward().censoring_observable() {
        return Err(Error::CensoringUnobservable(instance.name().to_string()));
    }
    let eps = params.eps;
    let budget = adaptive_probe_budget(eps);
    let max_steps = adaptive_max_steps(eps);
    let delta_probe = params.delta / (2.0 * budget as f64 * max_steps as f64);
    let m = dkw_sample_size(eps / 9.0, delta_probe)?;
    let (gap_lo, gap_hi) = (5.0 * eps / 9.0, 7.0 * eps / 9.0);
    let target = 2.0 * eps / 3.0;

    let base = rng.next_u64();
    let mut stream = 0u64;
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let mut probe = |x: f64, probes: &mut u64| -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if let Some(&f) = cache.get(&x.to_bits()) {
            return Ok(f);
        }
        *probes += 1;
        stream += 1;
        let f = estimate_cdf_at(instance, x, m, &mut child_rng(base, stream))?;
        cache.insert(x.to_bits(), f);
        Ok(f)
    };

    let mut probes = 0u64;
    let f_one = probe(1.0, &mut probes)?;
    let mut points = vec![0.0];
    let mut cdf_hat = vec![0.0];
    let mut in_window = vec![true];
    let mut width = target;
    for _ in 0..max_steps {
        let (x_prev, f_prev) = (*points.last().unwrap(), *cdf_hat.last().unwrap());
        if f_one - f_prev <= gap_hi {
            break;
        }
        let (mut lo, mut hi) = (x_prev, 1.0);
        let (mut f_lo, mut f_hi) = (f_prev, f_one);
        let mut guess = (x_prev + width).min(1.0);
        let mut bracketed = false;
        let mut accepted = None;
        for _ in 0..budget {
            let f = probe(guess, &mut probes)?;
            let gap = f - f_prev;
            if gap > gap_lo && gap < gap_hi {
                accepted = Some((guess, f));
                break;
            }
            if gap <= gap_lo {
                (lo, f_lo) = (guess, f);
            } else {
                (hi, f_hi) = (guess, f);
                bracketed = true;
            }
            guess = if bracketed {
                0.5 * (lo + hi)
            } else {
                (x_prev + 2.0 * (guess - x_prev)).min(1.0)
            };
            if guess <= lo || guess >= hi {
                // interval exhausted at floating-point resolution
                break;
            }
        }
        let (x, f, ok) = match accepted {
            Some((x, f)) => (x, f, true),
            None if lo > x_prev => (lo, f_lo, false),
            None => (hi, f_hi, false),
        };
        if x >= 1.0 {
            break;
        }
        width = x - x_prev;
        points.push(x);
        cdf_hat.push(f);
        in_window.push(ok);
    }
    points.push(1.0);
    cdf_hat.push(f_one);
    in_window.push(false);
    Ok(AdaptiveGrid {
        points,
        cdf_hat,
        in_window,
        probes,
        queries: probes * m,
    })
}

/// Adaptive-grid estimator for unknown `L`: the grid build gets half of `δ`
/// and the per-point estimates `δ/(2|Γ_A|)` each.
pub fn adaptive_grid_estimate<R: RngCore + ?Sized>(
    instance: &EnvironmentInstance,
    params: AccuracyParams,
    rng: &mut R,
) -> Result<EstimatorReport> {
    let params = AccuracyParams::new(params.eps, params.delta)?;
    let grid = build_adaptive_grid(instance, params, rng)?;
    let m = dkw_sample_size(params.eps, params.delta / (2.0 * grid.points.len() as f64))?;
    let mut report = estimate_on_points(instance, &grid.points, m, params, rng)?;
    report.queries_used += grid.queries;
    report.grid_queries = grid.queries;
    Ok(report)
}
