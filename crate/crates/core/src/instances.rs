//! Concrete `(g, F)` constructions and the name registry used by the CLI.
//!
//! Names follow `family[:key=value{,key=value}]`:
//!
//! | name | reward | distribution |
//! |------|--------|--------------|
//! | `impossibility:alpha=A` | four-case `g_α` | atoms at 1/2, α, 1 plus `3/(16v²)` on (1/2, α) |
//! | `plateau` | `γ` | `F₀` (flat utility 1/4 on [1/3, 1/2]) |
//! | `perturbed:w=W,eps=E` | `γ` | `F₀` with density moved from `[w−3ε, w)` to `(w, w+3ε]` |
//! | `hard:eps=E,i=I` | `γ` | member `i` (1-based) of the hard family |
//! | `example1` | `γ` below 1/3, `v` above | uniform |
//! | `example2` | `γ` | point mass at 1/3 |
//! | `uniform` | `γ` | uniform |
//! | `point-mass:at=X` | `γ` | point mass at `X` |

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::env::{
    Atom, EnvironmentInstance, FeedbackSupport, ImpossibilityReward, Piece, PostedPrice,
    SwitchToValue, Threshold, ValueDistribution,
};
use crate::{Error, Result};

const THIRD: f64 = 1.0 / 3.0;
const XI_TOL: f64 = 1e-12;
const SUPPORT_TOL: f64 = 1e-12;

/// CDF Lipschitz constant shared by the plateau base and every perturbation.
pub const PLATEAU_CDF_LIPSCHITZ: f64 = 13.0 / 4.0;

pub fn make_impossibility(alpha: f64) -> Result<EnvironmentInstance> {
    if !(alpha > 0.5 && alpha < 9.0 / 16.0) {
        return Err(Error::out_of_range(
            "alpha",
            format!("{alpha} not in (1/2, 9/16)"),
        ));
    }
    let atoms = vec![
        Atom {
            location: 0.5,
            mass: 1.0 / 8.0,
        },
        Atom {
            location: alpha,
            mass: 3.0 / (16.0 * alpha),
        },
        Atom {
            location: 1.0,
            mass: 0.5,
        },
    ];
    let pieces = vec![Piece::inverse_square(0.5, alpha, 0.0, 3.0 / 16.0)];
    let dist = ValueDistribution::new(atoms, pieces, None)?;
    EnvironmentInstance::new(
        format!("impossibility:alpha={alpha}"),
        Arc::new(ImpossibilityReward { alpha }),
        dist,
        FeedbackSupport::Impossibility { alpha },
    )
}

/// `F₀`: `3v/4` on [0, 1/3), `1 − 1/(4v)` on [1/3, 1/2], `v` on (1/2, 1].
pub fn plateau_cdf(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else if v < THIRD {
        0.75 * v
    } else if v <= 0.5 {
        1.0 - 1.0 / (4.0 * v)
    } else {
        v.min(1.0)
    }
}

/// Closed-form CDF of the perturbed plateau distribution.
pub fn perturbed_cdf(w: f64, eps: f64, v: f64) -> f64 {
    let lo = w - 3.0 * eps;
    let hi = w + 3.0 * eps;
    if v >= lo && v < w {
        plateau_cdf(v) - (v - lo)
    } else if v >= w && v <= hi {
        plateau_cdf(v) - (hi - v)
    } else {
        plateau_cdf(v)
    }
}

fn plateau_pieces() -> Vec<Piece> {
    vec![
        Piece::constant(0.0, THIRD, 0.75),
        Piece::inverse_square(THIRD, 0.5, 0.0, 0.25),
        Piece::constant(0.5, 1.0, 1.0),
    ]
}

pub fn make_plateau() -> Result<EnvironmentInstance> {
    let dist = ValueDistribution::new(vec![], plateau_pieces(), Some(PLATEAU_CDF_LIPSCHITZ))?;
    EnvironmentInstance::new(
        "plateau",
        Arc::new(PostedPrice),
        dist,
        FeedbackSupport::PostedPrice,
    )
}

/// Whether `(w, eps)` lies in the admissible set: `w − 3ε ≥ 1/3`, `w + 3ε ≤ 1/2`.
pub fn in_xi(w: f64, eps: f64) -> bool {
    eps > 0.0 && w - 3.0 * eps >= THIRD - XI_TOL && w + 3.0 * eps <= 0.5 + XI_TOL
}

pub fn make_perturbed(w: f64, eps: f64) -> Result<EnvironmentInstance> {
    make_perturbed_named(w, eps, format!("perturbed:w={w},eps={eps}"))
}

fn make_perturbed_named(w: f64, eps: f64, name: String) -> Result<EnvironmentInstance> {
    if !in_xi(w, eps) {
        return Err(Error::out_of_range(
            "(w, eps)",
            format!("({w}, {eps}) violates w-3eps >= 1/3, w+3eps <= 1/2"),
        ));
    }
    let lo = (w - 3.0 * eps).max(THIRD);
    let hi = (w + 3.0 * eps).min(0.5);
    let pieces = vec![
        Piece::constant(0.0, THIRD, 0.75),
        Piece::inverse_square(THIRD, lo, 0.0, 0.25),
        Piece::inverse_square(lo, w, -1.0, 0.25),
        Piece::inverse_square(w, hi, 1.0, 0.25),
        Piece::inverse_square(hi, 0.5, 0.0, 0.25),
        Piece::constant(0.5, 1.0, 1.0),
    ];
    let dist = ValueDistribution::new(vec![], pieces, Some(PLATEAU_CDF_LIPSCHITZ))?;
    EnvironmentInstance::new(
        name,
        Arc::new(PostedPrice),
        dist,
        FeedbackSupport::PostedPrice,
    )
}

/// Base plateau instance plus the perturbations `w_i = 1/3 + 3(2i−1)ε`,
/// `i = 1..=⌊1/(36ε)⌋`.
#[derive(Clone, Debug)]
pub struct HardFamily {
    pub eps: f64,
    pub base: Arc<EnvironmentInstance>,
    pub members: Vec<Arc<EnvironmentInstance>>,
    pub centers: Vec<f64>,
}

impl HardFamily {
    /// Perturbation windows `[w_i − 3ε, w_i + 3ε]`.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        self.centers
            .iter()
            .map(|&w| (w - 3.0 * self.eps, w + 3.0 * self.eps))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub fn hard_family_size(eps: f64) -> usize {
    (1.0 / (36.0 * eps) + 1e-9).floor() as usize
}

pub fn hard_family_center(eps: f64, i: usize) -> f64 {
    THIRD + 3.0 * (2.0 * i as f64 - 1.0) * eps
}

pub fn make_hard_family(eps: f64) -> Result<HardFamily> {
    if !(eps > 0.0 && eps < 1.0 / 36.0) {
        return Err(Error::out_of_range(
            "eps",
            format!("{eps} not in (0, 1/36)"),
        ));
    }
    let n = hard_family_size(eps);
    let centers: Vec<f64> = (1..=n).map(|i| hard_family_center(eps, i)).collect();
    let members = centers
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            make_perturbed_named(w, eps, format!("hard:eps={eps},i={}", k + 1)).map(Arc::new)
        })
        .collect::<Result<Vec<_>>>()?;
    let family = HardFamily {
        eps,
        base: Arc::new(make_plateau()?),
        members,
        centers,
    };
    let windows = family.windows();
    for pair in windows.windows(2) {
        if pair[0].1 > pair[1].0 + XI_TOL {
            return Err(Error::InvalidInstance(format!(
                "hard family windows overlap: {pair:?}"
            )));
        }
    }
    Ok(family)
}

/// `g(γ, v) = γ` below 1/3 and `v` above; uniform values.
pub fn make_example1() -> Result<EnvironmentInstance> {
    EnvironmentInstance::new(
        "example1",
        Arc::new(SwitchToValue { cut: THIRD }),
        ValueDistribution::uniform(0.0, 1.0)?,
        FeedbackSupport::Undeclared,
    )
}

/// `g(γ, v) = γ`; all mass at 1/3.
pub fn make_example2() -> Result<EnvironmentInstance> {
    make_point_mass(THIRD, "example2".to_string())
}

fn make_point_mass(at: f64, name: String) -> Result<EnvironmentInstance> {
    EnvironmentInstance::new(
        name,
        Arc::new(PostedPrice),
        ValueDistribution::point_mass(at)?,
        FeedbackSupport::PostedPrice,
    )
}

pub fn make_uniform_posted() -> Result<EnvironmentInstance> {
    EnvironmentInstance::new(
        "uniform",
        Arc::new(PostedPrice),
        ValueDistribution::uniform(0.0, 1.0)?,
        FeedbackSupport::PostedPrice,
    )
}

/// Exact feedback distribution `G_γ` as `(value, probability)` pairs with
/// positive probability, sorted by value.
pub fn feedback_pmf(instance: &EnvironmentInstance, gamma: Threshold) -> Result<Vec<(f64, f64)>> {
    let g = gamma.get();
    let dist = instance.distribution();
    let raw = match instance.support() {
        FeedbackSupport::Undeclared => return Err(Error::Unsupported(instance.name().to_string())),
        FeedbackSupport::PostedPrice => {
            let below = dist.prob_below(g);
            vec![(0.0, below), (g, 1.0 - below)]
        }
        FeedbackSupport::Impossibility { .. } => {
            let high = ImpossibilityReward::HIGH_VALUE;
            let below = dist.prob_below(g);
            let upper = 1.0 - dist.prob_below(g.max(high));
            let middle = (1.0 - below - upper).max(0.0);
            vec![(0.0, below), (g, middle), (instance.realize(g, 1.0), upper)]
        }
    };
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let mut sorted = raw;
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (x, p) in sorted {
        match merged.last_mut() {
            Some(last) if (last.0 - x).abs() <= SUPPORT_TOL => last.1 += p,
            _ => merged.push((x, p)),
        }
    }
    merged.retain(|&(_, p)| p > 1e-15);
    Ok(merged)
}

/// Values the feedback at `γ` takes with positive probability.
pub fn feedback_support(instance: &EnvironmentInstance, gamma: Threshold) -> Result<Vec<f64>> {
    Ok(feedback_pmf(instance, gamma)?
        .into_iter()
        .map(|(x, _)| x)
        .collect())
}

/// Parsed `family[:key=value{,key=value}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceName {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

impl InstanceName {
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let (family, rest) = match name.split_once(':') {
            Some((f, r)) => (f, Some(r)),
            None => (name, None),
        };
        if family.is_empty() {
            return Err(Error::Config(format!("empty instance family in `{name}`")));
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for kv in rest.split(',') {
                let (k, v) = kv.split_once('=').ok_or_else(|| {
                    Error::Config(format!("expected key=value in `{name}`, got `{kv}`"))
                })?;
                let v = parse_number(v.trim())
                    .ok_or_else(|| Error::Config(format!("bad number `{v}` in `{name}`")))?;
                if params.insert(k.trim().to_string(), v).is_some() {
                    return Err(Error::Config(format!("duplicate key `{k}` in `{name}`")));
                }
            }
        }
        Ok(InstanceName {
            family: family.to_string(),
            params,
        })
    }

    fn take(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("instance `{}` needs `{key}`", self.family)))
    }

    fn expect_keys(&self, keys: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::Config(format!(
                "unknown key `{k}` for `{}`",
                self.family
            ))),
            None => Ok(()),
        }
    }
}

/// Accepts decimals and simple fractions such as `1/40`.
fn parse_number(s: &str) -> Option<f64> {
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (f64, f64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (d != 0.0).then(|| n / d);
    }
    s.parse().ok()
}

/// Build an instance from its registry name.
pub fn from_name(name: &str) -> Result<EnvironmentInstance> {
    let parsed = InstanceName::parse(name)?;
    match parsed.family.as_str() {
        "impossibility" => {
            parsed.expect_keys(&["alpha"])?;
            make_impossibility(parsed.take("alpha")?)
        }
        "plateau" => {
            parsed.expect_keys(&[])?;
            make_plateau()
        }
        "perturbed" => {
            parsed.expect_keys(&["w", "eps"])?;
            make_perturbed(parsed.take("w")?, parsed.take("eps")?)
        }
        "hard" => {
            parsed.expect_keys(&["eps", "i"])?;
            let eps = parsed.take("eps")?;
            let i = parsed.take("i")?;
            let n = hard_family_size(eps);
            if i.fract() != 0.0 || i < 1.0 || i as usize > n {
                return Err(Error::out_of_range(
                    "hard family index",
                    format!("{i} not in 1..={n}"),
                ));
            }
            make_perturbed_named(
                hard_family_center(eps, i as usize),
                eps,
                name.trim().to_string(),
            )
        }
        "example1" => {
            parsed.expect_keys(&[])?;
            make_example1()
        }
        "example2" => {
            parsed.expect_keys(&[])?;
            make_example2()
        }
        "uniform" => {
            parsed.expect_keys(&[])?;
            make_uniform_posted()
        }
        "point-mass" => {
            parsed.expect_keys(&["at"])?;
            let at = parsed.take("at")?;
            make_point_mass(at, format!("point-mass:at={at}"))
        }
        other => Err(Error::Config(format!("unknown instance family `{other}`"))),
    }
}

/// One line per registered family: grammar and class tags.
pub fn registry_listing() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "impossibility:alpha=<(1/2,9/16)>",
            "reward MONO; distribution C_ALL",
        ),
        ("plateau", "reward MONO+LIP(1); distribution CDF_LIP(13/4)"),
        (
            "perturbed:w=<w>,eps=<eps>",
            "reward MONO+LIP(1); distribution CDF_LIP(13/4); (w,eps) admissible",
        ),
        (
            "hard:eps=<(0,1/36)>,i=<1..n>",
            "member i of the hard family; same tags as perturbed",
        ),
        (
            "example1",
            "reward MONO (gamma below 1/3, v above); distribution CDF_LIP(1) uniform",
        ),
        (
            "example2",
            "reward MONO+LIP(1); distribution C_ALL point mass at 1/3",
        ),
        ("uniform", "reward MONO+LIP(1); distribution CDF_LIP(1)"),
        (
            "point-mass:at=<x>",
            "reward MONO+LIP(1); distribution C_ALL",
        ),
    ]
}

/// Instances every invariant suite runs over.
pub fn catalog() -> Result<Vec<Arc<EnvironmentInstance>>> {
    let names = [
        "impossibility:alpha=0.52",
        "impossibility:alpha=0.55",
        "plateau",
        "perturbed:w=0.4,eps=0.01",
        "perturbed:w=0.36,eps=0.005",
        "perturbed:w=0.45,eps=0.015",
        "example1",
        "example2",
        "uniform",
    ];
    names.iter().map(|n| from_name(n).map(Arc::new)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(x: f64) -> Threshold {
        Threshold::new(x).unwrap()
    }

    #[test]
    fn impossibility_rejects_alpha() {
        assert!(make_impossibility(0.5).is_err());
        assert!(make_impossibility(0.5625).is_err());
        assert!(make_impossibility(0.53).is_ok());
    }

    #[test]
    fn impossibility_utility_cases() {
        let inst = make_impossibility(0.55).unwrap();
        let u = |g: f64| inst.exact_utility(t(g)).unwrap();
        assert!((u(0.3) - 0.4625).abs() < 1e-12);
        assert!((u(0.52) - 0.5).abs() < 1e-12);
        assert!((u(0.55) - 11.0 / 16.0).abs() < 1e-12);
        assert!((u(0.9) - 0.5).abs() < 1e-12);
        assert!((u(1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn impossibility_support() {
        let inst = make_impossibility(0.55).unwrap();
        // every value is at least 1/2, so nothing is censored at γ = 0.3
        assert_eq!(feedback_support(&inst, t(0.3)).unwrap(), vec![0.3, 0.625]);
        assert_eq!(feedback_support(&inst, t(0.6)).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            feedback_support(&inst, t(0.55)).unwrap(),
            vec![0.0, 0.55, 1.0]
        );
        assert_eq!(feedback_support(&inst, t(0.0)).unwrap(), vec![0.0, 0.625]);
        let pmf = feedback_pmf(&inst, t(0.52)).unwrap();
        let total: f64 = pmf.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plateau_flat_region() {
        let inst = make_plateau().unwrap();
        assert!((inst.exact_utility(t(0.4)).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(feedback_support(&inst, t(0.4)).unwrap(), vec![0.0, 0.4]);
    }

    #[test]
    fn perturbed_cdf_and_peak() {
        let inst = make_perturbed(0.4, 0.01).unwrap();
        let d = inst.distribution();
        assert!((d.cdf(0.37) - plateau_cdf(0.37)).abs() < 1e-14);
        assert!((d.cdf(0.4) - (plateau_cdf(0.4) - 0.03)).abs() < 1e-14);
        assert!((inst.exact_utility(t(0.4)).unwrap() - 0.262).abs() < 1e-12);
        let (g, u) = inst.exact_argmax_utility(1e-4).unwrap();
        assert!((g.get() - 0.4).abs() < 1e-12);
        assert!((u - 0.262).abs() < 1e-10);
    }

    #[test]
    fn perturbed_outside_xi() {
        assert!(make_perturbed(0.4, 0.05).is_err());
        assert!(make_perturbed(0.34, 0.01).is_err());
        assert!(make_perturbed(0.48, 0.01).is_err());
        assert!(make_perturbed(0.4, 0.0).is_err());
    }

    #[test]
    fn hard_family_sizes() {
        assert_eq!(make_hard_family(1.0 / 72.0).unwrap().len(), 2);
        assert_eq!(make_hard_family(1.0 / 36.0 - 1e-9).unwrap().len(), 1);
        assert_eq!(make_hard_family(1.0 / 400.0).unwrap().len(), 11);
        assert!(make_hard_family(1.0 / 36.0).is_err());
        assert!(make_hard_family(0.0).is_err());
    }

    #[test]
    fn example1_optimum() {
        let inst = make_example1().unwrap();
        let (g, u) = inst.exact_argmax_utility(1e-4).unwrap();
        assert_eq!(g.get(), 1.0 / 3.0);
        assert!((u - 4.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            feedback_support(&inst, t(0.5)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn example2_support() {
        let inst = make_example2().unwrap();
        assert_eq!(feedback_support(&inst, t(0.2)).unwrap(), vec![0.2]);
        assert_eq!(feedback_support(&inst, t(0.5)).unwrap(), vec![0.0]);
    }

    #[test]
    fn names_round_trip() {
        for name in [
            "impossibility:alpha=0.55",
            "perturbed:w=0.4,eps=0.01",
            "plateau",
            "example1",
            "point-mass:at=0.25",
        ] {
            assert_eq!(from_name(name).unwrap().name(), name);
        }
        let h = from_name("hard:eps=1/72,i=2").unwrap();
        assert!(
            (h.exact_utility(t(hard_family_center(1.0 / 72.0, 2)))
                .unwrap()
                - 0.25)
                .abs()
                > 1e-3
        );
    }

    #[test]
    fn bad_names() {
        for name in [
            "",
            "nope",
            "plateau:x=1",
            "perturbed:w=0.4",
            "perturbed:w=0.4,w=0.4,eps=0.01",
            "perturbed:w",
            "hard:eps=0.01,i=9",
            "hard:eps=0.01,i=1.5",
        ] {
            assert!(from_name(name).is_err(), "{name}");
        }
    }

    #[test]
    fn fractions_parse() {
        let n = InstanceName::parse("perturbed:w=2/5,eps=1/100").unwrap();
        assert_eq!(n.params["w"], 0.4);
        assert_eq!(n.params["eps"], 0.01);
    }

    #[test]
    fn catalog_builds() {
        assert_eq!(catalog().unwrap().len(), 9);
    }
}
