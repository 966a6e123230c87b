//! End-to-end worked examples across modules.

use std::sync::Arc;

use latent_threshold::analysis::{
    distinguish_sample_lb, feedback_distribution, hellinger_sq, monte_carlo_distinguisher,
};
use latent_threshold::env::Threshold;
use latent_threshold::estimators::{
    adaptive_grid_estimate, dkw_sample_size, estimate_utility_at, grid_estimate, AccuracyParams,
};
use latent_threshold::harness::{median, run_lower, run_upper, ExperimentConfig, ExperimentKind};
use latent_threshold::instances::{
    feedback_support, from_name, make_example1, make_example2, make_perturbed, make_plateau,
};
use latent_threshold::online::{run_online, Algorithm, FixedAdversary, OnlineConfig};
use latent_threshold::rng::child_rng;

fn t(x: f64) -> Threshold {
    Threshold::new(x).unwrap()
}

#[test]
fn impossibility_utility_pieces() {
    let inst = from_name("impossibility:alpha=0.55").unwrap();
    assert!((inst.exact_utility(t(0.3)).unwrap() - 0.4625).abs() < 1e-9);
    assert!((inst.exact_utility(t(0.52)).unwrap() - 0.5).abs() < 1e-9);
    assert!((inst.exact_utility(t(0.9)).unwrap() - 0.5).abs() < 1e-9);
    let support = feedback_support(&inst, t(0.3)).unwrap();
    assert!(support
        .iter()
        .all(|b| [0.0, 0.3, 0.625].iter().any(|x| (b - x).abs() < 1e-12)));
}

#[test]
fn exact_argmax_examples() {
    let (g, u) = make_example2().unwrap().exact_argmax_utility(1e-4).unwrap();
    assert!((g.get() - 1.0 / 3.0).abs() < 1e-12 && (u - 1.0 / 3.0).abs() < 1e-12);
    let (g, u) = make_perturbed(0.4, 0.01)
        .unwrap()
        .exact_argmax_utility(1e-4)
        .unwrap();
    assert!((g.get() - 0.4).abs() < 1e-9 && (u - 0.262).abs() < 1e-9);
    let (g, u) = make_example1().unwrap().exact_argmax_utility(1e-4).unwrap();
    assert!((g.get() - 1.0 / 3.0).abs() < 1e-9 && (u - 4.0 / 9.0).abs() < 1e-9);
}

#[test]
fn example1_matches_riemann_sum() {
    let inst = make_example1().unwrap();
    let n = 200_000;
    for g in [0.1, 0.25, 1.0 / 3.0, 0.6, 0.95] {
        let riemann: f64 = (0..n)
            .map(|k| (k as f64 + 0.5) / n as f64)
            .filter(|&v| v >= g)
            .map(|v| if g < 1.0 / 3.0 { g } else { v })
            .sum::<f64>()
            / n as f64;
        assert!(
            (inst.exact_utility(t(g)).unwrap() - riemann).abs() < 1e-5,
            "gamma {g}"
        );
    }
}

#[test]
fn plateau_estimates_stay_within_dkw_radius() {
    let inst = make_plateau().unwrap();
    let m = dkw_sample_size(0.01, 1e-4).unwrap();
    let mut inside = 0;
    for trial in 0..10_000u64 {
        let est = estimate_utility_at(&inst, t(0.4), m, &mut child_rng(17, trial)).unwrap();
        if (est.u_hat - 0.25).abs() <= 0.01 {
            inside += 1;
        }
    }
    assert!(inside >= 9_999, "{inside} of 10000 within 0.01");
}

fn success_count(name: &str, adaptive: bool) -> usize {
    let inst = from_name(name).unwrap();
    let (_, u_star) = inst.exact_argmax_utility(1e-4).unwrap();
    let params = AccuracyParams::new(0.05, 0.1).unwrap();
    (0..100u64)
        .filter(|&seed| {
            let mut rng = child_rng(23, seed);
            let report = if adaptive {
                adaptive_grid_estimate(&inst, params, &mut rng).unwrap()
            } else {
                grid_estimate(&inst, params, 1.0, &mut rng).unwrap()
            };
            inst.exact_utility(t(report.gamma_hat)).unwrap() >= u_star - 0.15
        })
        .count()
}

#[test]
fn grid_estimator_on_the_examples() {
    assert!(success_count("example2", false) >= 90);
    assert!(success_count("example1", false) >= 90);
}

#[test]
fn adaptive_estimator_on_example1() {
    assert!(success_count("example1", true) >= 90);
}

#[test]
fn distinguisher_around_the_lower_bound() {
    let (w, eps) = (0.415, 0.025);
    let base = make_plateau().unwrap();
    let pert = make_perturbed(w, eps).unwrap();
    let d2h = hellinger_sq(
        &feedback_distribution(&base, t(w)).unwrap(),
        &feedback_distribution(&pert, t(w)).unwrap(),
    );
    assert!(d2h <= 72.0 * eps * eps);
    let lb = distinguish_sample_lb(d2h, 0.01).unwrap();
    let many = monte_carlo_distinguisher(&base, &pert, t(w), 10 * lb, 2_000, &mut child_rng(31, 0))
        .unwrap();
    assert!(many <= 0.1, "error {many} with 10x the bound");
    let few = monte_carlo_distinguisher(
        &base,
        &pert,
        t(w),
        (lb / 4).max(1),
        2_000,
        &mut child_rng(31, 1),
    )
    .unwrap();
    assert!(few >= 0.01, "error {few} with a quarter of the bound");
}

#[test]
fn exp3_on_the_plateau_at_1e5() {
    let inst = Arc::new(make_plateau().unwrap());
    let cfg = OnlineConfig::new(100_000, Algorithm::Exp3).unwrap();
    let scaled: Vec<f64> = (0..20u64)
        .map(|seed| {
            let mut adv = FixedAdversary::auto(inst.clone()).unwrap();
            run_online(&mut adv, &cfg, seed, false)
                .unwrap()
                .cumulative_regret
                / 100_000f64.powf(2.0 / 3.0)
        })
        .collect();
    assert!(median(&scaled) <= 10.0, "median {}", median(&scaled));
}

#[test]
fn upper_examples() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Upper, false);
    cfg.k_values = vec![20, 50];
    let table = run_upper(&cfg).unwrap();
    let ok_50 = table
        .rows
        .iter()
        .filter(|r| r[0] == "example2" && r[1] == "50")
        .filter(|r| r[5].parse::<f64>().unwrap() <= 0.02);
    assert!(ok_50.count() >= 9);
    for r in table
        .rows
        .iter()
        .filter(|r| r[0] == "example1" && r[1] == "20")
    {
        assert!(r[5].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn lower_ratios_are_positive() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Lower, false);
    cfg.eps_values = vec![1.0 / 40.0];
    cfg.seeds.truncate(3);
    let table = run_lower(&cfg).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table
        .rows
        .iter()
        .all(|r| r[8].parse::<f64>().unwrap() > 0.0));
}
