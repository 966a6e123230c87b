//! Config-driven experiments with byte-reproducible CSV output.

pub mod config;
pub mod verify;

use std::sync::Arc;

pub use config::{EstimatorKind, ExperimentConfig, ExperimentKind};
pub use verify::{invariant_names, run_verify, InvariantOutcome, VerifyReport};

use crate::env::Threshold;
use crate::estimators::{
    build_adaptive_grid, estimate_on_points, fixed_grid, grid_estimate_with_m, natural_lipschitz,
    AccuracyParams,
};
use crate::instances::{from_name, hard_family_center, hard_family_size, make_perturbed};
use crate::online::{run_online, FixedAdversary, OnlineConfig};
use crate::output::{fmt_float, natural_key, CsvTable};
use crate::rng::{child_rng, child_seed};
use crate::{Error, Result};

/// Step of the exact argmax used to score estimators.
pub const ARGMAX_STEP: f64 = 1e-4;
/// Largest total budget tried by the lower-bound search.
pub const BUDGET_CEILING: u64 = 1_000_000_000;
/// Consecutive successful budget levels required by the lower-bound search.
pub const CONSECUTIVE_SUCCESSES: usize = 3;

pub const UPPER_HEADER: [&str; 7] = [
    "instance",
    "K",
    "seed",
    "gamma_hat",
    "queries_used",
    "loss",
    "predetermined_loss",
];
pub const LOWER_HEADER: [&str; 9] = [
    "eps",
    "seed",
    "instance",
    "member",
    "estimator",
    "grid_points",
    "grid_queries",
    "n_min",
    "ratio",
];
pub const ONLINE_HEADER: [&str; 8] = [
    "instance",
    "algorithm",
    "T",
    "seed",
    "arms",
    "cum_regret_expected",
    "cum_regret_realized",
    "regret_over_T23",
];

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run the experiment selected by `config.kind`. Verify runs return their
/// invariant table.
pub fn run(config: &ExperimentConfig) -> Result<CsvTable> {
    match config.kind {
        ExperimentKind::Upper => run_upper(config),
        ExperimentKind::Lower => run_lower(config),
        ExperimentKind::Online => run_online_sweep(config),
        ExperimentKind::Verify => Ok(run_verify(config)?.table()),
    }
}

fn expect_kind(config: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if config.kind != kind {
        return Err(Error::Config(format!(
            "expected a `{}` config, got `{}`",
            kind.label(),
            config.kind.label()
        )));
    }
    config.validate()
}

fn finish(mut table: CsvTable) -> CsvTable {
    table.sort_rows_by(natural_key);
    table
}

/// Fixed-budget grid estimation: `ε = 1/K`, total budget `K³` spread evenly
/// over the grid, loss measured with the exact utility.
pub fn run_upper(config: &ExperimentConfig) -> Result<CsvTable> {
    expect_kind(config, ExperimentKind::Upper)?;
    let mut table = CsvTable::new(&UPPER_HEADER);
    for name in &config.instances {
        let instance = from_name(name)?;
        let lipschitz = natural_lipschitz(&instance).ok_or_else(|| {
            Error::Config(format!(
                "`{name}` has no Lipschitz tag usable by the grid estimator"
            ))
        })?;
        let (_, u_star) = instance.exact_argmax_utility(ARGMAX_STEP)?;
        for &k in &config.k_values {
            let eps = 1.0 / k as f64;
            let params = AccuracyParams::new(eps, config.delta)?;
            let grid = fixed_grid(eps, lipschitz)?;
            let m = (k.pow(3) / grid.len() as u64).max(1);
            for &seed in &config.seeds {
                let mut rng = child_rng(seed, k);
                let report = grid_estimate_with_m(&instance, params, lipschitz, m, &mut rng)?;
                let u = instance.exact_utility(Threshold::new(report.gamma_hat)?)?;
                table.push(vec![
                    name.clone(),
                    k.to_string(),
                    seed.to_string(),
                    fmt_float(report.gamma_hat),
                    report.queries_used.to_string(),
                    fmt_float(u_star - u),
                    fmt_float(eps),
                ]);
            }
        }
    }
    Ok(finish(table))
}

/// Result of the minimal-budget search for one `(ε, seed)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerCell {
    pub eps: f64,
    pub seed: u64,
    pub member: usize,
    pub w: f64,
    pub grid_points: usize,
    pub grid_queries: u64,
    pub n_min: u64,
}

impl LowerCell {
    pub fn ratio(&self) -> f64 {
        (self.n_min as f64).ln() / (1.0 / self.eps).ln()
    }
}

/// Hard-family member (1-based) assigned to `seed`.
pub fn lower_member(eps: f64, seed: u64) -> usize {
    let n = hard_family_size(eps).max(1) as u64;
    (child_seed(seed, 0x4C_4F57_4552) % n) as usize + 1
}

/// Smallest budget `n = |Γ|·2^j` from which the estimator returns an
/// `ε`-optimal threshold at `CONSECUTIVE_SUCCESSES` successive levels.
/// The grid variant steps by `ε/L` with `L` the CDF constant of the member.
pub fn lower_cell(eps: f64, seed: u64, delta: f64, estimator: EstimatorKind) -> Result<LowerCell> {
    let member = lower_member(eps, seed);
    let w = hard_family_center(eps, member);
    let instance = make_perturbed(w, eps)?;
    let u_star = 0.25 + 3.0 * w * eps;
    let params = AccuracyParams::new(eps, delta)?;
    let root = child_seed(seed, eps.to_bits());
    let (points, grid_queries) = match estimator {
        EstimatorKind::Grid => {
            let lipschitz = instance
                .distribution()
                .cdf_lipschitz()
                .expect("hard family carries a CDF constant");
            (fixed_grid(eps, lipschitz)?.points, 0)
        }
        EstimatorKind::Adaptive => {
            let grid = build_adaptive_grid(&instance, params, &mut child_rng(root, u64::MAX))?;
            (grid.points, grid.queries)
        }
    };
    let mut streak = 0usize;
    let mut first_of_streak = 0u64;
    for j in 0u32.. {
        let m = 1u64 << j;
        let n = m * points.len() as u64;
        if n > BUDGET_CEILING {
            return Err(Error::BudgetCeiling {
                ceiling: BUDGET_CEILING,
            });
        }
        let report = estimate_on_points(
            &instance,
            &points,
            m,
            params,
            &mut child_rng(root, j as u64),
        )?;
        let u = instance.exact_utility(Threshold::new(report.gamma_hat)?)?;
        if u >= u_star - eps {
            if streak == 0 {
                first_of_streak = n;
            }
            streak += 1;
            if streak == CONSECUTIVE_SUCCESSES {
                break;
            }
        } else {
            streak = 0;
        }
    }
    Ok(LowerCell {
        eps,
        seed,
        member,
        w,
        grid_points: points.len(),
        grid_queries,
        n_min: first_of_streak,
    })
}

pub fn run_lower(config: &ExperimentConfig) -> Result<CsvTable> {
    expect_kind(config, ExperimentKind::Lower)?;
    let label = match config.estimator {
        EstimatorKind::Grid => "grid",
        EstimatorKind::Adaptive => "adaptive",
    };
    let mut table = CsvTable::new(&LOWER_HEADER);
    for &eps in &config.eps_values {
        for &seed in &config.seeds {
            let cell = lower_cell(eps, seed, config.delta, config.estimator)?;
            table.push(vec![
                fmt_float(eps),
                seed.to_string(),
                format!("hard:eps={eps},i={}", cell.member),
                cell.member.to_string(),
                label.to_string(),
                cell.grid_points.to_string(),
                cell.grid_queries.to_string(),
                cell.n_min.to_string(),
                fmt_float(cell.ratio()),
            ]);
        }
    }
    Ok(finish(table))
}

pub fn run_online_sweep(config: &ExperimentConfig) -> Result<CsvTable> {
    expect_kind(config, ExperimentKind::Online)?;
    let mut table = CsvTable::new(&ONLINE_HEADER);
    for name in &config.instances {
        let instance = Arc::new(from_name(name)?);
        for &horizon in &config.horizons {
            let online = OnlineConfig::new(horizon, config.algorithm)?;
            for &seed in &config.seeds {
                let mut adversary = FixedAdversary::auto(instance.clone())?;
                let trace = run_online(&mut adversary, &online, child_seed(seed, horizon), false)?;
                table.push(vec![
                    name.clone(),
                    config.algorithm.label().to_string(),
                    horizon.to_string(),
                    seed.to_string(),
                    trace.arms.to_string(),
                    fmt_float(trace.cumulative_regret),
                    fmt_float(trace.realized_regret),
                    fmt_float(trace.cumulative_regret / (horizon as f64).powf(2.0 / 3.0)),
                ]);
            }
        }
    }
    Ok(finish(table))
}
