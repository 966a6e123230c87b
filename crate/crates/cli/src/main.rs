use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use latent_threshold::estimators::{
    adaptive_grid_estimate, grid_estimate, natural_lipschitz, AccuracyParams, ScoredRun,
};
use latent_threshold::harness::{self, ExperimentConfig, ExperimentKind, ARGMAX_STEP};
use latent_threshold::instances::{from_name, registry_listing};
use latent_threshold::online::{run_online, Algorithm, FixedAdversary, OnlineConfig};
use latent_threshold::output::CsvTable;
use latent_threshold::rng::rng_from_seed;

#[derive(Parser)]
#[command(
    name = "threshold-lab",
    version,
    about = "Threshold learning under censored feedback: experiments and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config; missing keys take the defaults of the subcommand
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; replaces the seed list with seeds derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the large parameter grids
    #[arg(long)]
    full_scale: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed-budget grid estimation: loss against 1/K for budget K^3
    Upper(Common),
    /// Minimal budget on the hard family and ln n / ln(1/eps)
    Lower {
        #[command(flatten)]
        common: Common,
        /// Build the grid adaptively instead of from the Lipschitz constant
        #[arg(long)]
        adaptive: bool,
    },
    /// Online regret sweep over horizons
    Online(Common),
    /// Run the invariant suite; exits nonzero on any failure
    Verify {
        #[command(flatten)]
        common: Common,
        /// Add an instance with a negative density to the structural checks
        #[arg(long)]
        inject_fault: bool,
    },
    /// List registered instance families
    ListInstances,
    /// One (eps, delta) estimation run, scored against the exact optimum
    Estimate {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lipschitz constant of the grid (defaults to the instance's tag)
        #[arg(long)]
        lipschitz: Option<f64>,
        #[arg(long)]
        adaptive: bool,
    },
    /// Per-round regret trace of one online run
    Trace {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value = "exp3")]
        algorithm: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path, Some(kind), common.full_scale)
            .with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::defaults(kind, common.full_scale),
    };
    if let Some(seed) = common.seed {
        cfg.reseed(seed);
    }
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(table: &CsvTable, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            table
                .write_path(path)
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => table.write_to(std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_experiment(
    kind: ExperimentKind,
    common: &Common,
    tweak: impl FnOnce(&mut ExperimentConfig),
) -> Result<()> {
    let mut cfg = load(kind, common)?;
    tweak(&mut cfg);
    let table = harness::run(&cfg)?;
    emit(&table, cfg.output.as_ref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Upper(common) => run_experiment(ExperimentKind::Upper, &common, |_| {})?,
        Command::Lower { common, adaptive } => {
            run_experiment(ExperimentKind::Lower, &common, |c| {
                if adaptive {
                    c.estimator = harness::EstimatorKind::Adaptive;
                }
            })?
        }
        Command::Online(common) => run_experiment(ExperimentKind::Online, &common, |_| {})?,
        Command::Verify {
            common,
            inject_fault,
        } => {
            let mut cfg = load(ExperimentKind::Verify, &common)?;
            cfg.inject_fault |= inject_fault;
            let report = harness::run_verify(&cfg)?;
            for line in report.lines() {
                println!("{line}");
            }
            if let Some(path) = &cfg.output {
                report.table().write_path(path)?;
            }
            if !report.all_passed() {
                eprintln!("failed invariants: {}", report.failures().join(", "));
                return Ok(ExitCode::from(1));
            }
        }
        Command::ListInstances => {
            for (name, tags) in registry_listing() {
                println!("{name:<36} {tags}");
            }
        }
        Command::Estimate {
            instance,
            eps,
            delta,
            seed,
            lipschitz,
            adaptive,
        } => {
            let inst = from_name(&instance)?;
            let params = AccuracyParams::new(eps, delta)?;
            let mut rng = rng_from_seed(seed);
            let report = if adaptive {
                adaptive_grid_estimate(&inst, params, &mut rng)?
            } else {
                let Some(l) = lipschitz.or_else(|| natural_lipschitz(&inst)) else {
                    bail!("`{instance}` has no Lipschitz tag; pass --lipschitz")
                };
                grid_estimate(&inst, params, l, &mut rng)?
            };
            let mut table = CsvTable::new(&ScoredRun::HEADER);
            table.push(report.score(&inst, seed, ARGMAX_STEP)?.record());
            emit(&table, None)?;
        }
        Command::Trace {
            instance,
            horizon,
            algorithm,
            seed,
            out,
        } => {
            let inst = Arc::new(from_name(&instance)?);
            let mut adversary = FixedAdversary::auto(inst)?;
            let cfg = OnlineConfig::new(horizon, Algorithm::parse(&algorithm)?)?;
            let trace = run_online(&mut adversary, &cfg, seed, true)?;
            emit(&trace.rounds_table(), out.as_ref())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
