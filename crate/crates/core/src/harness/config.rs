//! Experiment configuration, read from TOML.
//!
//! ```toml
//! kind = "upper"                    # upper | lower | online | verify
//! instances = ["example1", "example2"]
//! k_values = [20, 30, 40, 50, 60]   # upper
//! eps_values = [0.025, 0.0125]      # lower
//! horizons = [1000, 10000]          # online
//! seeds = [1, 2, 3]                 # or: root_seed = 7, num_seeds = 10
//! delta = 0.1
//! algorithm = "exp3"                # exp3 | poly-inf
//! estimator = "grid"                # grid | adaptive
//! output = "out/upper.csv"
//! inject_fault = false              # verify only
//! ```
//!
//! Missing keys take the desk-scale defaults of the chosen kind.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::online::Algorithm;
use crate::rng::child_seed;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Upper,
    Lower,
    Online,
    Verify,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Upper => "upper",
            ExperimentKind::Lower => "lower",
            ExperimentKind::Online => "online",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Grid,
    Adaptive,
}

/// On-disk form; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Option<ExperimentKind>,
    instances: Option<Vec<String>>,
    k_values: Option<Vec<u64>>,
    eps_values: Option<Vec<f64>>,
    horizons: Option<Vec<u64>>,
    seeds: Option<Vec<u64>>,
    root_seed: Option<u64>,
    num_seeds: Option<u64>,
    delta: Option<f64>,
    algorithm: Option<String>,
    estimator: Option<EstimatorKind>,
    output: Option<PathBuf>,
    inject_fault: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub instances: Vec<String>,
    pub k_values: Vec<u64>,
    pub eps_values: Vec<f64>,
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    pub output: Option<PathBuf>,
    pub inject_fault: bool,
}

pub const DEFAULT_ROOT_SEED: u64 = 20_240_601;

fn derived_seeds(root: u64, n: u64) -> Vec<u64> {
    (0..n).map(|i| child_seed(root, i)).collect()
}

impl ExperimentConfig {
    /// Defaults for `kind`; `full_scale` switches to the large parameter grids.
    pub fn defaults(kind: ExperimentKind, full_scale: bool) -> Self {
        let mut cfg = ExperimentConfig {
            kind,
            instances: Vec::new(),
            k_values: Vec::new(),
            eps_values: Vec::new(),
            horizons: Vec::new(),
            seeds: derived_seeds(DEFAULT_ROOT_SEED, 10),
            delta: 0.1,
            algorithm: Algorithm::Exp3,
            estimator: EstimatorKind::Grid,
            output: None,
            inject_fault: false,
        };
        match kind {
            ExperimentKind::Upper => {
                cfg.instances = vec!["example1".into(), "example2".into()];
                cfg.k_values = if full_scale {
                    vec![100, 125, 150, 175, 200]
                } else {
                    vec![20, 30, 40, 50, 60]
                };
            }
            ExperimentKind::Lower => {
                cfg.instances = vec!["hard".into()];
                cfg.eps_values = if full_scale {
                    vec![1.0 / 400.0, 1.0 / 500.0, 1.0 / 600.0]
                } else {
                    vec![1.0 / 40.0, 1.0 / 60.0, 1.0 / 80.0]
                };
            }
            ExperimentKind::Online => {
                cfg.instances = vec!["perturbed:w=0.4,eps=0.01".into()];
                cfg.horizons = if full_scale {
                    vec![1_000, 10_000, 100_000, 1_000_000]
                } else {
                    vec![1_000, 10_000, 100_000]
                };
                cfg.seeds = derived_seeds(DEFAULT_ROOT_SEED, 20);
            }
            ExperimentKind::Verify => {
                cfg.seeds = vec![DEFAULT_ROOT_SEED];
            }
        }
        cfg
    }

    pub fn from_toml_str(
        text: &str,
        fallback_kind: Option<ExperimentKind>,
        full_scale: bool,
    ) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let kind = raw
            .kind
            .or(fallback_kind)
            .ok_or_else(|| Error::Config("`kind` is required".into()))?;
        if let (Some(k), Some(f)) = (raw.kind, fallback_kind) {
            if k != f {
                return Err(Error::Config(format!(
                    "config kind `{}` does not match `{}`",
                    k.label(),
                    f.label()
                )));
            }
        }
        let mut cfg = Self::defaults(kind, full_scale);
        if let Some(v) = raw.instances {
            cfg.instances = v;
        }
        if let Some(v) = raw.k_values {
            cfg.k_values = v;
        }
        if let Some(v) = raw.eps_values {
            cfg.eps_values = v;
        }
        if let Some(v) = raw.horizons {
            cfg.horizons = v;
        }
        match (raw.seeds, raw.root_seed, raw.num_seeds) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Error::Config(
                    "give either `seeds` or `root_seed`/`num_seeds`, not both".into(),
                ))
            }
            (Some(s), None, None) => cfg.seeds = s,
            (None, root, n) => {
                if root.is_some() || n.is_some() {
                    let n = n.unwrap_or(cfg.seeds.len() as u64);
                    cfg.seeds = derived_seeds(root.unwrap_or(DEFAULT_ROOT_SEED), n);
                }
            }
        }
        if let Some(d) = raw.delta {
            cfg.delta = d;
        }
        if let Some(a) = raw.algorithm {
            cfg.algorithm = Algorithm::parse(&a)?;
        }
        if let Some(e) = raw.estimator {
            cfg.estimator = e;
        }
        cfg.output = raw.output;
        cfg.inject_fault = raw.inject_fault.unwrap_or(false);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(
        path: &Path,
        fallback_kind: Option<ExperimentKind>,
        full_scale: bool,
    ) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, fallback_kind, full_scale)
    }

    /// Replace the seed list by `n` seeds derived from `root`.
    pub fn reseed(&mut self, root: u64) {
        let n = self.seeds.len().max(1) as u64;
        self.seeds = derived_seeds(root, n);
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return fail("seed list is empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta {} not in (0, 1)", self.delta));
        }
        match self.kind {
            ExperimentKind::Upper => {
                if self.k_values.is_empty() || self.k_values.contains(&0) {
                    return fail("`k_values` must be nonempty and positive".into());
                }
                if self.instances.is_empty() {
                    return fail("`instances` is empty".into());
                }
            }
            ExperimentKind::Lower => {
                if self.eps_values.is_empty() {
                    return fail("`eps_values` is empty".into());
                }
                if let Some(e) = self
                    .eps_values
                    .iter()
                    .find(|&&e| !(e > 0.0 && e < 1.0 / 36.0))
                {
                    return fail(format!("eps {e} not in (0, 1/36)"));
                }
            }
            ExperimentKind::Online => {
                if self.horizons.is_empty() || self.horizons.contains(&0) {
                    return fail("`horizons` must be nonempty and positive".into());
                }
                if self.instances.is_empty() {
                    return fail("`instances` is empty".into());
                }
            }
            ExperimentKind::Verify => {}
        }
        Ok(())
    }
}
