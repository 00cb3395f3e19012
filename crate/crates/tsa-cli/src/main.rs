//! `tsa`: generate markets, run solvers and bounds, simulate policies, and build result tables.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{Config, ConfigError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "tsa",
    version,
    about = "Two-sided assortment optimization experiments"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Global {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for instance-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct Source {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Built-in tight instance: prop1, lemma3, lemma6 or thm3.
    #[arg(long, requires = "n")]
    tight: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances for every configured size and seed.
    Generate,
    /// Compute optima, algorithm values and bounds for one instance (JSON to stdout).
    Solve {
        #[command(flatten)]
        source: Source,
        /// Comma-separated quantity names, e.g. opt_fa,ub_fa.
        #[arg(long, value_delimiter = ',')]
        what: Option<Vec<String>>,
    },
    /// Monte Carlo a policy on one instance.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// greedy-customers, greedy-suppliers, sampling, cointoss or fs-approx.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        /// Write one simulated run as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Gap report CSV for one instance or the configured corpus.
    Gaps {
        #[command(flatten)]
        source: Source,
    },
    /// Per-instance rows plus min/mean/max tables over the configured corpus.
    Tables {
        /// Add wall-clock columns (output is then not byte-deterministic).
        #[arg(long)]
        timings: bool,
    },
}

fn merged(global: &Global) -> anyhow::Result<Config> {
    let mut cfg = Config::load(global.config.as_deref())?;
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(j) = global.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(o) = &global.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn apply_source(cfg: &mut Config, source: &Source) {
    if let Some(p) = &source.instance {
        cfg.instance = Some(p.clone());
        cfg.tight = None;
    }
    if let (Some(kind), Some(n)) = (&source.tight, source.n) {
        cfg.tight = Some(config::TightSpec {
            kind: kind.clone(),
            n,
        });
        cfg.instance = None;
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = merged(&cli.global)?;
    match &cli.command {
        Command::Solve { source, .. }
        | Command::Simulate { source, .. }
        | Command::Gaps { source } => apply_source(&mut cfg, source),
        _ => {}
    }
    match &cli.command {
        Command::Solve { what: Some(w), .. } => cfg.quantities = Some(w.clone()),
        Command::Simulate { policy, runs, .. } => {
            if let Some(p) = policy {
                cfg.policy = p.clone();
            }
            if let Some(r) = runs {
                cfg.runs = *r;
            }
        }
        Command::Tables { timings: true } => cfg.timings = true,
        _ => {}
    }
    cfg.validate()?;
    #[cfg(feature = "parallel")]
    if let Some(j) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| config::bad(e.to_string()))?;
    }
    match cli.command {
        Command::Generate => commands::generate(&cfg),
        Command::Solve { .. } => commands::solve(&cfg),
        Command::Simulate { trace, .. } => commands::simulate(&cfg, trace.as_deref()),
        Command::Gaps { .. } => commands::gaps(&cfg),
        Command::Tables { .. } => commands::tables(&cfg),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<tsa_core::Error>() {
        Some(tsa_core::Error::SizeCap { .. }) => 3,
        Some(tsa_core::Error::TimeLimit) => 4,
        Some(
            tsa_core::Error::Parse(_) | tsa_core::Error::Invalid(_) | tsa_core::Error::Domain(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tsa: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
