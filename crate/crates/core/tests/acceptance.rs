//! Acceptance suite. Runs as a plain binary (`harness = false`) so that one
//! PASS/FAIL line per criterion is always printed; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use latent_threshold::analysis::{
    distinguish_sample_lb, feedback_distribution, hellinger_sq, product_hellinger_sq, tv_distance,
    DiscreteDistribution,
};
use latent_threshold::env::Threshold;
use latent_threshold::estimators::{grid_estimate, natural_lipschitz, AccuracyParams};
use latent_threshold::harness::{self, median, ExperimentConfig, ExperimentKind};
use latent_threshold::instances::{
    catalog, from_name, make_impossibility, make_perturbed, make_plateau,
};
use latent_threshold::output::CsvTable;
use latent_threshold::rng::{child_rng, child_seed};
use rand::Rng;

type Outcome = Result<String, String>;

const THIRD: f64 = 1.0 / 3.0;
const ROOT: u64 = 0x5EED_ACCE;

fn t(x: f64) -> Threshold {
    Threshold::new(x).unwrap()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(x: impl std::fmt::Display) -> String {
    x.to_string()
}

// Independent closed forms used as oracles.

fn plateau_cdf(v: f64) -> f64 {
    match v {
        v if v < THIRD => 0.75 * v,
        v if v <= 0.5 => 1.0 - 0.25 / v,
        v => v,
    }
}

fn perturbed_cdf(w: f64, eps: f64, v: f64) -> f64 {
    let base = plateau_cdf(v);
    if (w - 3.0 * eps..w).contains(&v) {
        base - (v - (w - 3.0 * eps))
    } else if (w..=w + 3.0 * eps).contains(&v) {
        base - (w + 3.0 * eps - v)
    } else {
        base
    }
}

fn example1_utility(g: f64) -> f64 {
    if g < THIRD {
        g * (1.0 - g)
    } else {
        (1.0 - g * g) / 2.0
    }
}

fn example2_utility(g: f64) -> f64 {
    if g <= THIRD {
        g
    } else {
        0.0
    }
}

fn plateau_utility(g: f64) -> f64 {
    g * (1.0 - plateau_cdf(g))
}

fn closed_form_utility(name: &str, g: f64) -> f64 {
    match name {
        "example1" => example1_utility(g),
        "example2" => example2_utility(g),
        "plateau" => plateau_utility(g),
        other => panic!("no closed form for {other}"),
    }
}

fn column(table: &CsvTable, name: &str) -> usize {
    table
        .header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("missing column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

// Criteria.

fn c1_construction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut close = |got: f64, want: f64, what: &str| -> Result<(), String> {
        worst = worst.max((got - want).abs());
        check((got - want).abs() <= 1e-8, || {
            format!("{what}: {got} vs {want}")
        })
    };
    for alpha in [0.52, 0.55, 0.56] {
        let inst = make_impossibility(alpha).map_err(e)?;
        close(
            inst.exact_utility(t(alpha)).map_err(e)?,
            11.0 / 16.0,
            &format!("U_{alpha}({alpha})"),
        )?;
        for k in 1..20 {
            let g = 0.5 + (alpha - 0.5) * k as f64 / 20.0;
            close(
                inst.exact_utility(t(g)).map_err(e)?,
                0.5,
                &format!("U_{alpha}({g})"),
            )?;
        }
    }
    let base = make_plateau().map_err(e)?;
    for k in 0..=100 {
        let g = THIRD + (0.5 - THIRD) * k as f64 / 100.0;
        close(
            base.exact_utility(t(g)).map_err(e)?,
            0.25,
            &format!("U_0({g})"),
        )?;
    }
    for (w, eps) in [(0.4, 0.01), (0.36, 0.005), (0.45, 0.015), (0.415, 0.025)] {
        let inst = make_perturbed(w, eps).map_err(e)?;
        close(
            inst.exact_utility(t(w)).map_err(e)?,
            0.25 + 3.0 * w * eps,
            &format!("U_{{{w},{eps}}}(w)"),
        )?;
    }
    Ok(format!("max abs error {worst:.1e}"))
}

fn c2_lipschitz() -> Outcome {
    let n = 1000;
    let mut suites = 0;
    for inst in catalog().map_err(e)? {
        let u: Vec<f64> = (0..=n)
            .map(|k| inst.exact_utility(t(k as f64 / n as f64)))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        let right = inst.reward_class().right_constant();
        let left = inst
            .distribution()
            .cdf_lipschitz()
            .filter(|_| inst.reward_class().monotone);
        for i in 0..=n {
            for j in i + 1..=n {
                let gap = (j - i) as f64 / n as f64;
                let rise = u[j] - u[i];
                if let Some(l) = right {
                    check(rise <= l * gap + 1e-8, || {
                        format!("{} right-Lipschitz fails on [{i},{j}]", inst.name())
                    })?;
                }
                if let Some(l) = left {
                    check(rise >= -l * gap - 1e-8, || {
                        format!("{} left-Lipschitz fails on [{i},{j}]", inst.name())
                    })?;
                }
            }
        }
        suites += usize::from(right.is_some()) + usize::from(left.is_some());
    }
    Ok(format!("{suites} suites over all pairs of a 1e-3 grid"))
}

fn c3_support() -> Outcome {
    let mut seen = 0u64;
    for (a, alpha) in [0.52, 0.55].into_iter().enumerate() {
        let inst = make_impossibility(alpha).map_err(e)?;
        for k in 0..50 {
            let g = k as f64 / 49.0;
            let allowed = [0.0, g, 5.0 / 8.0, 1.0];
            let mut rng = child_rng(ROOT, 300 + 100 * a as u64 + k);
            for _ in 0..100_000 {
                let b = inst.query(t(g), &mut rng).get();
                check(allowed.iter().any(|x| (b - x).abs() <= 1e-12), || {
                    format!("alpha={alpha}, gamma={g}: b={b}")
                })?;
                seen += 1;
            }
        }
    }
    Ok(format!("{seen} queries, all in {{0, gamma, 5/8, 1}}"))
}

fn c4_hellinger() -> Outcome {
    let base = make_plateau().map_err(e)?;
    let mut worst: f64 = 0.0;
    for (w, eps) in [(0.4, 0.01), (0.36, 0.005), (0.45, 0.015)] {
        let pert = make_perturbed(w, eps).map_err(e)?;
        let steps = (6.0 * eps / 1e-3).round() as usize;
        for k in 0..=steps {
            let g = w - 3.0 * eps + k as f64 * 1e-3;
            let (f0, f1) = (plateau_cdf(g), perturbed_cdf(w, eps, g));
            let oracle = 0.5
                * ((f0.sqrt() - f1.sqrt()).powi(2)
                    + ((1.0 - f0).sqrt() - (1.0 - f1).sqrt()).powi(2));
            let a = feedback_distribution(&base, t(g)).map_err(e)?;
            let b = feedback_distribution(&pert, t(g)).map_err(e)?;
            let h = hellinger_sq(&a, &b);
            check((h - oracle).abs() <= 1e-12, || {
                format!("({w},{eps}) at {g}: {h} vs oracle {oracle}")
            })?;
            check(h <= 72.0 * eps * eps, || {
                format!("({w},{eps}) at {g}: {h} > 72 eps^2")
            })?;
            worst = worst.max(h / (72.0 * eps * eps));
        }
    }
    Ok(format!("max d2H/(72 eps^2) = {worst:.4}"))
}

fn c5_estimator() -> Outcome {
    let delta = 0.1;
    let mut lines = Vec::new();
    for name in ["example1", "example2", "plateau"] {
        let inst = from_name(name).map_err(e)?;
        let l = natural_lipschitz(&inst).ok_or("untagged instance")?;
        let u_star = match name {
            "example1" => 4.0 / 9.0,
            "example2" => THIRD,
            _ => 0.25,
        };
        for eps in [0.05, 0.02] {
            let params = AccuracyParams::new(eps, delta).map_err(e)?;
            let mut ok = 0;
            for seed in 0..100u64 {
                let mut rng = child_rng(child_seed(ROOT, 5), seed);
                let report = grid_estimate(&inst, params, l, &mut rng).map_err(e)?;
                if closed_form_utility(name, report.gamma_hat) >= u_star - 3.0 * eps {
                    ok += 1;
                }
            }
            let frac = ok as f64 / 100.0;
            check(frac >= 1.0 - delta - 0.05, || {
                format!("{name}, eps={eps}: success {frac}")
            })?;
            lines.push(format!("{name}@{eps}={frac:.2}"));
        }
    }
    Ok(lines.join(" "))
}

fn c6_upper(table: &CsvTable) -> Outcome {
    let (inst, k, gh, loss) = (
        column(table, "instance"),
        column(table, "K"),
        column(table, "gamma_hat"),
        column(table, "loss"),
    );
    let mut cells: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for row in &table.rows {
        let name = row[inst].as_str();
        let u_star = if name == "example1" { 4.0 / 9.0 } else { THIRD };
        let oracle = u_star - closed_form_utility(name, num(&row[gh]));
        check((oracle - num(&row[loss])).abs() <= 1e-8, || {
            format!("{name}: loss {} vs oracle {oracle}", row[loss])
        })?;
        cells
            .entry((row[inst].clone(), num(&row[k]) as u64))
            .or_default()
            .push(oracle);
    }
    let mut lines = Vec::new();
    for ((name, k), losses) in &cells {
        let med = median(losses);
        check(med < 1.0 / *k as f64, || {
            format!("{name}, K={k}: median loss {med} >= 1/K")
        })?;
        lines.push(format!("{name}/{k}:{med:.4}"));
    }
    check(cells.len() == 10, || {
        format!("expected 10 cells, got {}", cells.len())
    })?;
    Ok(lines.join(" "))
}

fn c7_lower(table: &CsvTable) -> Outcome {
    let (eps_col, n_col) = (column(table, "eps"), column(table, "n_min"));
    let mut by_eps: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for row in &table.rows {
        let eps = num(&row[eps_col]);
        let ratio = num(&row[n_col]).ln() / (1.0 / eps).ln();
        by_eps
            .entry((1.0 / eps).round() as u64)
            .or_default()
            .push(ratio);
    }
    let medians: BTreeMap<u64, f64> = by_eps.iter().map(|(k, v)| (*k, median(v))).collect();
    for (inv, med) in &medians {
        check((2.5..=3.5).contains(med), || {
            format!("eps=1/{inv}: median ratio {med:.4} outside [2.5, 3.5]")
        })?;
    }
    let (m40, m80) = (medians[&40], medians[&80]);
    check((m80 - 3.0).abs() < (m40 - 3.0).abs(), || {
        format!("no trend toward 3: 1/40 -> {m40:.4}, 1/80 -> {m80:.4}")
    })?;
    Ok(medians
        .iter()
        .map(|(k, m)| format!("1/{k}:{m:.3}"))
        .collect::<Vec<_>>()
        .join(" "))
}

fn c8_online(table: &CsvTable) -> Outcome {
    let (t_col, r_col) = (column(table, "T"), column(table, "cum_regret_expected"));
    let mut by_t: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for row in &table.rows {
        by_t.entry(num(&row[t_col]) as u64)
            .or_default()
            .push(num(&row[r_col]));
    }
    check(by_t.values().all(|v| v.len() == 20), || {
        "expected 20 seeds per horizon".into()
    })?;
    let scaled: Vec<(u64, f64)> = by_t
        .iter()
        .map(|(t, v)| (*t, median(v) / (*t as f64).powf(2.0 / 3.0)))
        .collect();
    let mut floor = f64::INFINITY;
    for &(horizon, s) in &scaled {
        check(s <= 2.0 * floor, || {
            format!(
                "T={horizon}: regret/T^(2/3) = {s:.4} exceeds twice the earlier minimum {floor:.4}"
            )
        })?;
        floor = floor.min(s);
    }
    let first = median(&by_t[&1_000]);
    let last = median(&by_t[&100_000]);
    check(last < 100.0 * first, || {
        format!("not sublinear: {last} vs 100 x {first}")
    })?;
    Ok(scaled
        .iter()
        .map(|(t, s)| format!("T={t}:{s:.3}"))
        .collect::<Vec<_>>()
        .join(" "))
}

fn random_pmf<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + floor).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

fn dist(p: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::new(p.iter().enumerate().map(|(i, &q)| (i as f64, q))).unwrap()
}

fn c9_distance_facts() -> Outcome {
    let mut rng = child_rng(ROOT, 9);
    for i in 0..1000 {
        let n = rng.gen_range(2..9);
        let (p, q) = (random_pmf(&mut rng, n, 1e-3), random_pmf(&mut rng, n, 1e-3));
        let tv_o: f64 = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let h_o: f64 = 0.5
            * p.iter()
                .zip(&q)
                .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
                .sum::<f64>();
        let (d1, d2) = (dist(&p), dist(&q));
        let (tv, h) = (tv_distance(&d1, &d2), hellinger_sq(&d1, &d2));
        check(
            (tv - tv_o).abs() <= 1e-12 && (h - h_o).abs() <= 1e-12,
            || format!("pair {i}: distances disagree"),
        )?;
        check(1.0 - tv * tv >= (1.0 - h).powi(2) - 1e-12, || {
            format!("Hellinger-TV inequality, pair {i}")
        })?;
        let f: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let gap = (d1.expect(|x| f[x as usize]) - d2.expect(|x| f[x as usize])).abs();
        check(gap <= tv + 1e-12, || {
            format!("TV expectation gap, pair {i}: {gap} > {tv}")
        })?;
    }
    for i in 0..1000 {
        let n = rng.gen_range(2..9);
        let eps = rng.gen_range(1e-3..0.5);
        let p = random_pmf(&mut rng, n, 0.05);
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean: f64 = p.iter().zip(&raw).map(|(a, r)| a * r).sum();
        let centered: Vec<f64> = raw.iter().map(|r| r - mean).collect();
        let top = centered.iter().fold(1e-300f64, |m, r| m.max(r.abs()));
        let q: Vec<f64> = p
            .iter()
            .zip(&centered)
            .map(|(a, r)| a * (1.0 + r * eps / top))
            .collect();
        let h = hellinger_sq(&dist(&p), &dist(&q));
        check(h <= eps * eps / 2.0 + 1e-12, || {
            format!("ratio Hellinger bound, pair {i}: {h} > {}", eps * eps / 2.0)
        })?;
    }
    for i in 0..1000 {
        let d: f64 = rng.gen_range(0.0..1.0);
        let m: u64 = rng.gen_range(1..300);
        let v = product_hellinger_sq(d, m).map_err(e)?;
        let mut direct = 1.0;
        for _ in 0..m {
            direct *= 1.0 - d;
        }
        check((v - (1.0 - direct)).abs() <= 1e-12, || {
            format!("product Hellinger, case {i}: {v} vs {}", 1.0 - direct)
        })?;
        check(v <= m as f64 * d + 1e-12, || {
            format!("product Hellinger, case {i}: exceeds m d")
        })?;
    }
    let lb = distinguish_sample_lb(7.2e-3, 0.01).map_err(e)?;
    check(lb == 112, || {
        format!("distinguish_sample_lb(7.2e-3, 0.01) = {lb}")
    })?;
    for _ in 0..1000 {
        let d: f64 = rng.gen_range(1e-4..0.5);
        let delta: f64 = rng.gen_range(1e-4..0.24);
        let want = ((1.0 / (4.0 * delta)).ln() / (4.0 * d)).ceil() as u64;
        let got = distinguish_sample_lb(d, delta).map_err(e)?;
        check(got.abs_diff(want) <= 1, || {
            format!("lb({d}, {delta}) = {got}, formula {want}")
        })?;
    }
    Ok("3000 pairs/cases plus lb(7.2e-3, 0.01) = 112".into())
}

fn c10_determinism(first: &BTreeMap<&'static str, Vec<u8>>) -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    for (label, bytes) in first {
        let table = run_kind(label)?;
        let path = dir.path().join(format!("{label}.csv"));
        table.write_path(&path).map_err(e)?;
        let again = std::fs::read(&path).map_err(e)?;
        check(&again == bytes, || format!("{label}: second run differs"))?;
    }
    Ok(format!("{} CSVs byte-identical", first.len()))
}

fn kind_of(label: &str) -> ExperimentKind {
    match label {
        "upper" => ExperimentKind::Upper,
        "lower" => ExperimentKind::Lower,
        "online" => ExperimentKind::Online,
        _ => ExperimentKind::Verify,
    }
}

fn run_kind(label: &str) -> Result<CsvTable, String> {
    harness::run(&ExperimentConfig::defaults(kind_of(label), false)).map_err(e)
}

struct Report {
    failed: usize,
}

impl Report {
    fn record(&mut self, n: usize, title: &str, elapsed: Duration, outcome: Outcome) {
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({title}, {secs:.1}s): {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL criterion {n} ({title}, {secs:.1}s): {detail}");
            }
        }
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut report = Report { failed: 0 };
    let (o, d) = timed(c1_construction);
    report.record(1, "closed-form utilities", d, o);
    let (o, d) = timed(c2_lipschitz);
    report.record(2, "Lipschitz suites", d, o);
    let (o, d) = timed(c3_support);
    report.record(3, "impossibility feedback support", d, o);
    let (o, d) = timed(c4_hellinger);
    report.record(4, "Hellinger bound", d, o);
    let (o, d) = timed(c5_estimator);
    report.record(5, "estimator 3eps success", d, o);

    let mut first: BTreeMap<&'static str, Vec<u8>> = BTreeMap::new();
    for (n, label, title) in [
        (6, "upper", "upper-bound loss"),
        (7, "lower", "lower-bound ratio"),
        (8, "online", "online regret"),
    ] {
        let ((o, bytes), d) = timed(|| match run_kind(label) {
            Ok(table) => {
                let bytes = table.to_bytes().unwrap();
                let o = match label {
                    "upper" => c6_upper(&table),
                    "lower" => c7_lower(&table),
                    _ => c8_online(&table),
                };
                (o, Some(bytes))
            }
            Err(err) => (Err(err), None),
        });
        if let Some(b) = bytes {
            first.insert(label, b);
        }
        report.record(n, title, d, o);
    }

    let (o, d) = timed(c9_distance_facts);
    report.record(9, "Hellinger and TV facts", d, o);
    let (o, d) = timed(|| {
        run_kind("verify")
            .and_then(|t| t.to_bytes().map_err(e))
            .and_then(|b| {
                first.insert("verify", b);
                c10_determinism(&first)
            })
    });
    report.record(10, "byte determinism", d, o);

    if report.failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 10 criteria failed", report.failed);
        ExitCode::FAILURE
    }
}
