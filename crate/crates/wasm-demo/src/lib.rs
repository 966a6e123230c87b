//! Browser bindings: utility curves, one estimation run, and a regret curve.
//! Each binding returns a JSON string; the `*_json` functions hold the logic
//! and also run natively.

use std::sync::Arc;

use latent_threshold::env::Threshold;
use latent_threshold::estimators::{
    adaptive_grid_estimate, grid_estimate, natural_lipschitz, AccuracyParams,
};
use latent_threshold::instances::{catalog, from_name, registry_listing};
use latent_threshold::online::{run_online, Algorithm, FixedAdversary, OnlineConfig};
use latent_threshold::rng::rng_from_seed;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_CURVE_POINTS: usize = 2001;
const MAX_HORIZON: u64 = 200_000;
const TRACE_SAMPLES: usize = 400;

type Res = Result<String, String>;

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Concrete catalog names plus the parameterized name templates.
pub fn instances_json() -> String {
    let names: Vec<String> = catalog()
        .map(|c| c.iter().map(|i| i.name().to_string()).collect())
        .unwrap_or_default();
    let templates: Vec<_> = registry_listing()
        .into_iter()
        .map(|(n, t)| json!({ "name": n, "tags": t }))
        .collect();
    json!({ "catalog": names, "templates": templates }).to_string()
}

/// Exact `U(γ)` on `points` evenly spaced thresholds.
pub fn utility_curve_json(instance: &str, points: usize) -> Res {
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_CURVE_POINTS}"));
    }
    let inst = from_name(instance).map_err(err)?;
    let mut gamma = Vec::with_capacity(points);
    let mut utility = Vec::with_capacity(points);
    for k in 0..points {
        let g = k as f64 / (points - 1) as f64;
        gamma.push(g);
        utility.push(
            inst.exact_utility(Threshold::new(g).map_err(err)?)
                .map_err(err)?,
        );
    }
    let (best, u_star) = inst.exact_argmax_utility(1e-4).map_err(err)?;
    Ok(
        json!({ "gamma": gamma, "utility": utility, "argmax": best.get(), "max": u_star })
            .to_string(),
    )
}

/// One estimator run; reports the grid estimates and the exact utility at
/// the returned threshold.
pub fn estimate_json(instance: &str, eps: f64, delta: f64, seed: u64, adaptive: bool) -> Res {
    let inst = from_name(instance).map_err(err)?;
    let params = AccuracyParams::new(eps, delta).map_err(err)?;
    if eps < 0.01 {
        return Err("eps below 0.01 is too slow for the browser".into());
    }
    let mut rng = rng_from_seed(seed);
    let report = if adaptive {
        adaptive_grid_estimate(&inst, params, &mut rng).map_err(err)?
    } else {
        let l = natural_lipschitz(&inst).ok_or("instance has no Lipschitz tag")?;
        grid_estimate(&inst, params, l, &mut rng).map_err(err)?
    };
    let scored = report.score(&inst, seed, 1e-4).map_err(err)?;
    Ok(json!({
        "gamma_hat": report.gamma_hat,
        "u_hat": report.u_hat_at_gamma_hat,
        "u_exact": scored.u_exact_at_gamma_hat,
        "u_star": scored.u_star,
        "success": scored.success_3eps,
        "queries": report.queries_used,
        "grid": report.per_point.iter().map(|p| p.gamma).collect::<Vec<_>>(),
        "estimates": report.per_point.iter().map(|p| p.u_hat).collect::<Vec<_>>(),
        "warning": report.tag_warning,
    })
    .to_string())
}

/// Cumulative expected regret of one online run, subsampled for plotting.
pub fn regret_curve_json(instance: &str, horizon: u64, algorithm: &str, seed: u64) -> Res {
    if horizon == 0 || horizon > MAX_HORIZON {
        return Err(format!("horizon must be in 1..={MAX_HORIZON}"));
    }
    let inst = Arc::new(from_name(instance).map_err(err)?);
    let mut adversary = FixedAdversary::auto(inst).map_err(err)?;
    let cfg = OnlineConfig::new(horizon, Algorithm::parse(algorithm).map_err(err)?).map_err(err)?;
    let trace = run_online(&mut adversary, &cfg, seed, true).map_err(err)?;
    let stride = trace.per_round.len().div_ceil(TRACE_SAMPLES).max(1);
    let picked: Vec<_> = trace
        .per_round
        .iter()
        .enumerate()
        .filter(|(i, _)| (i + 1) % stride == 0 || i + 1 == trace.per_round.len())
        .map(|(_, r)| r)
        .collect();
    Ok(json!({
        "t": picked.iter().map(|r| r.t).collect::<Vec<_>>(),
        "regret": picked.iter().map(|r| r.cum_regret_expected).collect::<Vec<_>>(),
        "realized": picked.iter().map(|r| r.cum_regret_realized).collect::<Vec<_>>(),
        "arms": trace.arms,
        "best_gamma": trace.best_fixed_gamma,
        "final_regret": trace.cumulative_regret,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn instances() -> String {
    instances_json()
}

#[wasm_bindgen]
pub fn utility_curve(instance: &str, points: usize) -> Result<String, JsValue> {
    utility_curve_json(instance, points).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn estimate(
    instance: &str,
    eps: f64,
    delta: f64,
    seed: u64,
    adaptive: bool,
) -> Result<String, JsValue> {
    estimate_json(instance, eps, delta, seed, adaptive).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn regret_curve(
    instance: &str,
    horizon: u64,
    algorithm: &str,
    seed: u64,
) -> Result<String, JsValue> {
    regret_curve_json(instance, horizon, algorithm, seed).map_err(|e| JsValue::from_str(&e))
}
