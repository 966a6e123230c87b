//! Named invariant checks behind `threshold-lab verify`.
//!
//! Structural checks run over the catalog plus, when fault injection is on,
//! an instance whose density goes negative. Every other check uses fixed
//! constructions and seeds derived from the configured root seed.

use std::sync::Arc;

use rand::Rng;

use super::config::ExperimentConfig;
use crate::analysis::{
    dkw_failure_bound, feedback_distribution, hellinger_sq, product_hellinger_sq, tv_distance,
    DiscreteDistribution, EmpiricalCdf,
};
use crate::env::{
    check_class, EnvironmentInstance, FeedbackSupport, Piece, PostedPrice, Threshold,
    ValueDistribution,
};
use crate::estimators::{
    dkw_sample_size, estimate_utility_at, fixed_grid, grid_estimate, AccuracyParams,
};
use crate::instances::{
    catalog, make_hard_family, make_impossibility, make_perturbed, make_plateau, perturbed_cdf,
    PLATEAU_CDF_LIPSCHITZ,
};
use crate::online::{run_online, Algorithm, FixedAdversary, OnlineConfig};
use crate::output::CsvTable;
use crate::rng::{child_rng, child_seed};
use crate::Result;

type Check = fn(&Context) -> std::result::Result<String, String>;

struct Context {
    seed: u64,
    structural: Vec<Arc<EnvironmentInstance>>,
    catalog: Vec<Arc<EnvironmentInstance>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub outcomes: Vec<InvariantOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.name)
            .collect()
    }

    pub fn lines(&self) -> Vec<String> {
        self.outcomes
            .iter()
            .map(|o| {
                format!(
                    "{} {}: {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    o.detail
                )
            })
            .collect()
    }

    /// Rows in registration order.
    pub fn table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["invariant", "status", "detail"]);
        for o in &self.outcomes {
            t.push(vec![
                o.name.to_string(),
                if o.passed { "PASS" } else { "FAIL" }.to_string(),
                o.detail.clone(),
            ]);
        }
        t
    }
}

/// Registered invariants, in execution order.
const INVARIANTS: [(&str, Check); 24] = [
    ("distribution-valid", distribution_valid),
    ("density-nonnegative", density_nonnegative),
    ("reward-class-tags", reward_class_tags),
    ("censoring", censoring),
    ("monte-carlo-consistency", monte_carlo_consistency),
    ("left-lipschitz-utility", left_lipschitz_utility),
    ("right-lipschitz-utility", right_lipschitz_utility),
    ("impossibility-gap", impossibility_gap),
    ("plateau-flat", plateau_flat),
    ("perturbed-density", perturbed_density),
    ("hard-family-disjoint", hard_family_disjoint),
    ("empirical-mean-identity", empirical_mean_identity),
    ("budget-accounting", budget_accounting),
    ("fixed-grid-multiples", fixed_grid_multiples),
    ("hellinger-tv-inequality", hellinger_tv_inequality),
    ("tv-expectation-gap", tv_expectation_gap),
    ("ratio-hellinger-bound", ratio_hellinger_bound),
    ("product-hellinger", product_hellinger),
    ("window-cdf-ratios", window_cdf_ratios),
    ("hellinger-72eps2", hellinger_bound),
    ("dkw-band", dkw_band),
    ("regret-nonnegative", regret_nonnegative),
    ("discretization-loss", discretization_loss),
    ("estimator-determinism", estimator_determinism),
];

/// Density `2.2` on [0, 1/2] and `−0.2` on (1/2, 1]: total mass 1, but the
/// density is negative on the upper half.
pub fn faulty_instance() -> EnvironmentInstance {
    let dist = ValueDistribution::new_unchecked(
        vec![],
        vec![
            Piece::constant(0.0, 0.5, 2.2),
            Piece::constant(0.5, 1.0, -0.2),
        ],
        None,
    );
    EnvironmentInstance::new_unchecked(
        "fault:negative-density",
        Arc::new(PostedPrice),
        dist,
        FeedbackSupport::PostedPrice,
    )
}

pub fn invariant_names() -> Vec<&'static str> {
    INVARIANTS.iter().map(|i| i.0).collect()
}

pub fn run_verify(config: &ExperimentConfig) -> Result<VerifyReport> {
    let catalog = catalog()?;
    let mut structural = catalog.clone();
    if config.inject_fault {
        structural.push(Arc::new(faulty_instance()));
    }
    let ctx = Context {
        seed: config.seeds.first().copied().unwrap_or(0),
        structural,
        catalog,
    };
    let outcomes = INVARIANTS
        .iter()
        .map(|&(name, check)| {
            let (passed, detail) = match check(&ctx) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            InvariantOutcome {
                name,
                passed,
                detail,
            }
        })
        .collect();
    Ok(VerifyReport { outcomes })
}

fn t(x: f64) -> Threshold {
    Threshold::new(x).expect("threshold in [0, 1]")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn utility_grid(inst: &EnvironmentInstance, n: usize) -> std::result::Result<Vec<f64>, String> {
    (0..=n)
        .map(|k| {
            inst.exact_utility(t(k as f64 / n as f64))
                .map_err(|e| format!("{}: {e}", inst.name()))
        })
        .collect()
}

fn distribution_valid(ctx: &Context) -> std::result::Result<String, String> {
    for inst in &ctx.structural {
        let issues = inst.distribution().validate();
        ensure(issues.is_empty(), || {
            format!("{}: {}", inst.name(), issues.join("; "))
        })?;
    }
    Ok(format!("{} distributions", ctx.structural.len()))
}

fn density_nonnegative(ctx: &Context) -> std::result::Result<String, String> {
    for inst in &ctx.structural {
        for k in 0..=10_000 {
            let v = k as f64 / 10_000.0;
            if let Some(f) = inst.distribution().density(v) {
                ensure(f >= -1e-12, || {
                    format!("{}: density {f} at v={v}", inst.name())
                })?;
            }
        }
    }
    Ok(format!(
        "{} distributions on a 1e-4 grid",
        ctx.structural.len()
    ))
}

fn reward_class_tags(ctx: &Context) -> std::result::Result<String, String> {
    for inst in &ctx.catalog {
        let issues = check_class(inst.reward(), 100);
        ensure(issues.is_empty(), || {
            format!("{}: {}", inst.name(), issues.join("; "))
        })?;
    }
    Ok(format!("{} rewards on a 0.01 grid", ctx.catalog.len()))
}

fn censoring(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 1);
    for inst in &ctx.catalog {
        for _ in 0..10_000 {
            let gamma: f64 = rng.gen();
            let v = inst.distribution().sample(&mut rng);
            let b = inst.realize(gamma, v);
            let expected = if v < gamma {
                0.0
            } else {
                inst.reward().evaluate(gamma, v)
            };
            ensure(b == expected, || {
                format!("{}: b({gamma}, {v}) = {b}", inst.name())
            })?;
        }
    }
    Ok("10^4 exposed draws per instance".into())
}

fn monte_carlo_consistency(ctx: &Context) -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    for (i, inst) in ctx.catalog.iter().enumerate() {
        for (j, &g) in [0.2, 0.4, 0.53, 0.8].iter().enumerate() {
            let exact = inst.exact_utility(t(g)).map_err(|e| e.to_string())?;
            let mut rng = child_rng(ctx.seed, 1000 + 10 * i as u64 + j as u64);
            let est =
                estimate_utility_at(inst, t(g), 1_000_000, &mut rng).map_err(|e| e.to_string())?;
            let err = (est.u_hat - exact).abs();
            worst = worst.max(err);
            ensure(err <= 5e-3, || {
                format!(
                    "{} at {g}: mean {} vs exact {exact}",
                    inst.name(),
                    est.u_hat
                )
            })?;
        }
    }
    Ok(format!("max deviation {worst:.2e} over 10^6 queries"))
}

fn left_lipschitz_utility(ctx: &Context) -> std::result::Result<String, String> {
    let mut checked = 0;
    for inst in &ctx.catalog {
        let (Some(l), true) = (
            inst.distribution().cdf_lipschitz(),
            inst.reward_class().monotone,
        ) else {
            continue;
        };
        let u = utility_grid(inst, 1000)?;
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                let gap = (j - i) as f64 / 1000.0;
                ensure(u[j] - u[i] >= -l * gap - 1e-8, || {
                    format!("{}: U drops too fast on [{i}, {j}]e-3", inst.name())
                })?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} instances"))
}

fn right_lipschitz_utility(ctx: &Context) -> std::result::Result<String, String> {
    let mut checked = 0;
    for inst in &ctx.catalog {
        let Some(l) = inst.reward_class().right_constant() else {
            continue;
        };
        let u = utility_grid(inst, 1000)?;
        for i in 0..u.len() {
            for j in i + 1..u.len() {
                let gap = (j - i) as f64 / 1000.0;
                ensure(u[j] - u[i] <= l * gap + 1e-8, || {
                    format!("{}: U rises too fast on [{i}, {j}]e-3", inst.name())
                })?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} instances"))
}

fn impossibility_gap(_: &Context) -> std::result::Result<String, String> {
    let mut min_gap = f64::INFINITY;
    for alpha in [0.51, 0.52, 0.53, 0.54, 0.55, 0.56] {
        let inst = make_impossibility(alpha).map_err(|e| e.to_string())?;
        let peak = inst.exact_utility(t(alpha)).map_err(|e| e.to_string())?;
        for k in 0..=1000 {
            let g = k as f64 / 1000.0;
            if (g - alpha).abs() < 1e-12 {
                continue;
            }
            let gap = peak - inst.exact_utility(t(g)).map_err(|e| e.to_string())?;
            min_gap = min_gap.min(gap);
            ensure(gap >= 0.125 - 1e-12, || {
                format!("alpha={alpha}: gap {gap} at {g}")
            })?;
        }
    }
    Ok(format!("min gap {min_gap}"))
}

fn plateau_flat(_: &Context) -> std::result::Result<String, String> {
    let inst = make_plateau().map_err(|e| e.to_string())?;
    for k in 0..=1000 {
        let g = k as f64 / 1000.0;
        let u = inst.exact_utility(t(g)).map_err(|e| e.to_string())?;
        if (1.0 / 3.0..=0.5).contains(&g) {
            ensure((u - 0.25).abs() <= 1e-8, || {
                format!("U({g}) = {u} inside the plateau")
            })?;
        } else {
            ensure(u < 0.25, || format!("U({g}) = {u} outside the plateau"))?;
        }
    }
    Ok("U = 1/4 exactly on [1/3, 1/2]".into())
}

fn perturbed_density(_: &Context) -> std::result::Result<String, String> {
    for (w, eps) in [
        (0.4, 0.01),
        (0.36, 0.005),
        (0.45, 0.015),
        (0.35, 1.0 / 180.0),
    ] {
        let inst = make_perturbed(w, eps).map_err(|e| e.to_string())?;
        let d = inst.distribution();
        let mass = d.integrated_density().map_err(|e| e.to_string())?;
        ensure((mass - 1.0).abs() <= 1e-9, || {
            format!("({w}, {eps}): density integrates to {mass}")
        })?;
        let mut prev = 0.0;
        for k in 0..=10_000 {
            let v = k as f64 / 10_000.0;
            let f = d.density(v).unwrap_or(0.0);
            ensure(f >= 0.0, || format!("({w}, {eps}): density {f} at {v}"))?;
            let c = d.cdf(v);
            ensure((c - perturbed_cdf(w, eps, v)).abs() <= 1e-12, || {
                format!("({w}, {eps}): CDF mismatch at {v}")
            })?;
            if k > 0 {
                ensure(c - prev <= PLATEAU_CDF_LIPSCHITZ * 1e-4 + 1e-12, || {
                    format!("({w}, {eps}): CDF slope at {v}")
                })?;
            }
            prev = c;
        }
    }
    Ok("4 perturbations".into())
}

fn hard_family_disjoint(_: &Context) -> std::result::Result<String, String> {
    for eps in [1.0 / 72.0, 1.0 / 400.0, 1.0 / 1000.0] {
        let fam = make_hard_family(eps).map_err(|e| e.to_string())?;
        let w = fam.windows();
        for a in 0..w.len() {
            for b in a + 1..w.len() {
                ensure(w[a].1 <= w[b].0 + 1e-12 || w[b].1 <= w[a].0 + 1e-12, || {
                    format!("eps={eps}: windows {a} and {b} overlap")
                })?;
            }
        }
    }
    Ok("windows meet only at endpoints".into())
}

fn empirical_mean_identity(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 2);
    for inst in &ctx.catalog {
        let g = t(0.45);
        let samples: Vec<f64> = (0..5000).map(|_| inst.query(g, &mut rng).get()).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let ecdf = EmpiricalCdf::new(samples).map_err(|e| e.to_string())?;
        let integral = ecdf.survival_integral(0.0, 1.0);
        ensure((integral - mean).abs() <= 1e-12, || {
            format!("{}: {integral} vs {mean}", inst.name())
        })?;
    }
    Ok("mean equals survival integral".into())
}

fn budget_accounting(ctx: &Context) -> std::result::Result<String, String> {
    let inst = &ctx.catalog[2];
    for (eps, l) in [(0.1, 1.0), (0.07, 1.0), (0.2, PLATEAU_CDF_LIPSCHITZ)] {
        let params = AccuracyParams::new(eps, 0.1).map_err(|e| e.to_string())?;
        let r = grid_estimate(inst, params, l, &mut child_rng(ctx.seed, 3))
            .map_err(|e| e.to_string())?;
        let n = (l / eps + 1e-9).floor() as u64 + 1;
        let size = if (l / eps - (l / eps).round()).abs() < 1e-9 {
            n
        } else {
            n + 1
        };
        let m = dkw_sample_size(eps, 0.1 / size as f64).map_err(|e| e.to_string())?;
        ensure(r.queries_used == size * m, || {
            format!("eps={eps}, L={l}: {} != {size}*{m}", r.queries_used)
        })?;
    }
    Ok("queries = |grid| * m".into())
}

fn fixed_grid_multiples(_: &Context) -> std::result::Result<String, String> {
    for (eps, l) in [
        (0.05, 1.0),
        (0.02, 1.0),
        (0.05, PLATEAU_CDF_LIPSCHITZ),
        (0.03, 1.7),
    ] {
        let g = fixed_grid(eps, l).map_err(|e| e.to_string())?;
        let step = eps / l;
        for &p in &g.points[..g.len() - 1] {
            let k = (p / step).round();
            ensure(
                (p - k * step).abs() <= 2.0 * f64::EPSILON * p.max(f64::MIN_POSITIVE),
                || format!("{p} is not a multiple of {step}"),
            )?;
        }
        ensure(*g.points.last().unwrap() == 1.0, || {
            "grid does not end at 1".into()
        })?;
    }
    Ok("points are multiples of eps/L".into())
}

fn random_pair<R: Rng>(rng: &mut R) -> (DiscreteDistribution, DiscreteDistribution, Vec<f64>) {
    let n = rng.gen_range(2..8);
    let support: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let draw = |rng: &mut R| {
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let p = draw(rng);
    let q = draw(rng);
    let d1 = DiscreteDistribution::new(support.iter().copied().zip(p)).expect("valid pmf");
    let d2 = DiscreteDistribution::new(support.iter().copied().zip(q)).expect("valid pmf");
    (d1, d2, support)
}

fn hellinger_tv_inequality(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 4);
    for i in 0..1000 {
        let (a, b, _) = random_pair(&mut rng);
        let (tv, h) = (tv_distance(&a, &b), hellinger_sq(&a, &b));
        ensure(1.0 - tv * tv >= (1.0 - h).powi(2) - 1e-12, || {
            format!("pair {i}: tv={tv}, h2={h}")
        })?;
    }
    Ok("1000 pairs".into())
}

fn tv_expectation_gap(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 5);
    for i in 0..1000 {
        let (a, b, support) = random_pair(&mut rng);
        let h: Vec<f64> = support.iter().map(|_| rng.gen::<f64>()).collect();
        let f = |x: f64| h[support.iter().position(|&s| s == x).unwrap()];
        let diff = (a.expect(f) - b.expect(f)).abs();
        ensure(diff <= tv_distance(&a, &b) + 1e-12, || {
            format!("triple {i}: {diff}")
        })?;
    }
    Ok("1000 triples".into())
}

fn ratio_hellinger_bound(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 6);
    for i in 0..1000 {
        let eps: f64 = rng.gen_range(0.001..0.5);
        let n = rng.gen_range(2..8);
        let p: Vec<f64> = {
            let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        };
        // q = p·(1 + r) with |r| ≤ ε and Σ p·r = 0
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shift: f64 = p.iter().zip(&raw).map(|(pi, x)| pi * x).sum();
        let centered: Vec<f64> = raw.iter().map(|x| x - shift).collect();
        let top = centered
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1e-300);
        let r: Vec<f64> = centered.iter().map(|x| x * eps / top).collect();
        let q: Vec<f64> = p.iter().zip(&r).map(|(pi, ri)| pi * (1.0 + ri)).collect();
        let support: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let d1 = DiscreteDistribution::new(support.iter().copied().zip(p.clone()))
            .map_err(|e| e.to_string())?;
        let d2 =
            DiscreteDistribution::new(support.iter().copied().zip(q)).map_err(|e| e.to_string())?;
        let h = hellinger_sq(&d1, &d2);
        ensure(h <= eps * eps / 2.0 + 1e-12, || {
            format!("pair {i}: h2={h}, eps={eps}")
        })?;
    }
    Ok("1000 pairs".into())
}

fn product_hellinger(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 7);
    for i in 0..1000 {
        let d: f64 = rng.gen_range(0.0..1.0);
        let m: u64 = rng.gen_range(1..200);
        let v = product_hellinger_sq(d, m).map_err(|e| e.to_string())?;
        let direct = 1.0 - (1.0 - d).powi(m as i32);
        ensure((v - direct).abs() <= 1e-12, || {
            format!("case {i}: {v} vs {direct}")
        })?;
        ensure(v <= m as f64 * d + 1e-12, || format!("case {i}: {v} > m*d"))?;
    }
    Ok("1000 cases".into())
}

fn window_cdf_ratios(_: &Context) -> std::result::Result<String, String> {
    let base = make_plateau().map_err(|e| e.to_string())?;
    for (w, eps) in [(0.4, 0.01), (0.36, 0.005), (0.45, 0.015)] {
        let pert = make_perturbed(w, eps).map_err(|e| e.to_string())?;
        for k in 0..=1000 {
            let g = w - 3.0 * eps + 6.0 * eps * k as f64 / 1000.0;
            let (p0, p1) = (
                base.distribution().prob_below(g),
                pert.distribution().prob_below(g),
            );
            let r0 = p1 / p0;
            let r1 = (1.0 - p1) / (1.0 - p0);
            ensure(
                (1.0 - 12.0 * eps - 1e-12..=1.0 + 1e-12).contains(&r0),
                || format!("({w},{eps}) at {g}: {r0}"),
            )?;
            ensure(
                (1.0 - 1e-12..=1.0 + 6.0 * eps + 1e-12).contains(&r1),
                || format!("({w},{eps}) at {g}: {r1}"),
            )?;
        }
    }
    Ok("3 windows".into())
}

fn hellinger_bound(_: &Context) -> std::result::Result<String, String> {
    let base = make_plateau().map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (w, eps) in [(0.4, 0.01), (0.36, 0.005), (0.45, 0.015)] {
        let pert = make_perturbed(w, eps).map_err(|e| e.to_string())?;
        let mut g = w - 3.0 * eps;
        while g <= w + 3.0 * eps + 1e-12 {
            let a = feedback_distribution(&base, t(g)).map_err(|e| e.to_string())?;
            let b = feedback_distribution(&pert, t(g)).map_err(|e| e.to_string())?;
            let h = hellinger_sq(&a, &b);
            worst = worst.max(h / (72.0 * eps * eps));
            ensure(h <= 72.0 * eps * eps, || format!("({w},{eps}) at {g}: {h}"))?;
            g += 1e-3;
        }
    }
    Ok(format!("max d2H / (72 eps^2) = {worst:.3}"))
}

fn dkw_band(ctx: &Context) -> std::result::Result<String, String> {
    let mut rng = child_rng(ctx.seed, 8);
    let n = 200;
    let trials = 10_000;
    let mut exceed = [0usize; 2];
    let eps = [0.05, 0.1];
    for _ in 0..trials {
        let s: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let dev = EmpiricalCdf::new(s)
            .map_err(|e| e.to_string())?
            .sup_deviation(|x| x.clamp(0.0, 1.0));
        for (c, &e) in exceed.iter_mut().zip(&eps) {
            if dev > e {
                *c += 1;
            }
        }
    }
    for (c, &e) in exceed.iter().zip(&eps) {
        let frac = *c as f64 / trials as f64;
        ensure(frac <= dkw_failure_bound(n, e) + 0.01, || {
            format!("eps={e}: {frac} exceed")
        })?;
    }
    Ok(format!(
        "exceedance {} / {} at eps 0.05 / 0.1",
        exceed[0], exceed[1]
    ))
}

fn regret_nonnegative(ctx: &Context) -> std::result::Result<String, String> {
    let inst = Arc::new(make_perturbed(0.4, 0.01).map_err(|e| e.to_string())?);
    for alg in [Algorithm::Exp3, Algorithm::PolyInf] {
        let mut adv = FixedAdversary::auto(inst.clone()).map_err(|e| e.to_string())?;
        let cfg = OnlineConfig::new(2000, alg).map_err(|e| e.to_string())?;
        let trace = run_online(&mut adv, &cfg, child_seed(ctx.seed, 9), false)
            .map_err(|e| e.to_string())?;
        ensure(trace.cumulative_regret >= -1e-6, || {
            format!("{}: {}", alg.label(), trace.cumulative_regret)
        })?;
    }
    Ok("expected regret >= 0".into())
}

fn discretization_loss(ctx: &Context) -> std::result::Result<String, String> {
    for inst in ctx
        .catalog
        .iter()
        .filter(|i| i.reward_class().right_constant().is_some())
    {
        let l = inst.reward_class().right_constant().unwrap();
        let mut adv = FixedAdversary::auto(inst.clone()).map_err(|e| e.to_string())?;
        let cfg = OnlineConfig::new(1000, Algorithm::Exp3).map_err(|e| e.to_string())?;
        let trace = run_online(&mut adv, &cfg, child_seed(ctx.seed, 10), false)
            .map_err(|e| e.to_string())?;
        let loss = trace.best_fixed_total - trace.best_arm_total;
        let bound = 1000.0 * l * cfg.discretization_eps;
        ensure(loss <= bound + 1e-9, || {
            format!("{}: {loss} > {bound}", inst.name())
        })?;
    }
    Ok("loss <= T L eps".into())
}

fn estimator_determinism(ctx: &Context) -> std::result::Result<String, String> {
    let inst = &ctx.catalog[2];
    let params = AccuracyParams::new(0.1, 0.1).map_err(|e| e.to_string())?;
    let a = grid_estimate(inst, params, 1.0, &mut child_rng(ctx.seed, 11))
        .map_err(|e| e.to_string())?;
    let b = grid_estimate(inst, params, 1.0, &mut child_rng(ctx.seed, 11))
        .map_err(|e| e.to_string())?;
    ensure(a == b, || "reports differ".into())?;
    Ok("identical reports".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    #[test]
    fn fault_is_caught_by_structural_checks() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Verify, false);
        cfg.inject_fault = true;
        let catalog = catalog().unwrap();
        let mut structural = catalog.clone();
        structural.push(Arc::new(faulty_instance()));
        let ctx = Context {
            seed: 1,
            structural,
            catalog,
        };
        assert!(distribution_valid(&ctx)
            .unwrap_err()
            .contains("negative density"));
        assert!(density_nonnegative(&ctx).is_err());
    }

    #[test]
    fn names_are_unique() {
        let mut names: Vec<&str> = INVARIANTS.iter().map(|i| i.0).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), INVARIANTS.len());
    }
}
