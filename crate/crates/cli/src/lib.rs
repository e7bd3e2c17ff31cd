//! Command-line driver: configuration, experiment orchestration and report
//! emission for the exact Newton-map library.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use newton_odometer_core::ExactScalar;

pub use config::ExperimentConfig;
pub use error::HarnessError;

pub const THREADS_ENV: &str = "NEWTON_ODOMETER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "newton-odometer", version, about = "Exact Newton-map experiments and odometer verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (JSON). Omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a nice piecewise-affine approximation of an input function.
    Approximate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Classify an exact grid of starting points.
    ClassifyGrid {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        family: PathBuf,
    },
    /// Build and verify a refinement tower.
    Tower {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Largest prime reported in the coverage profile.
        #[arg(long, default_value_t = 13)]
        primes: u64,
    },
    /// Profile, orbit and conjugacy checks on α-sequences.
    VerifyOdometer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        beta: Option<PathBuf>,
        /// Depth of the exhaustive orbit check; defaults to the declared depth of α.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, default_value_t = 13)]
        primes: u64,
    },
    /// Sample perturbations of a rooted piece and check the halving bound.
    Contraction {
        #[command(flatten)]
        common: Common,
        /// Model document holding the piece; without it the config `piece` is used.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        piece: usize,
        #[arg(long)]
        trials: Option<usize>,
        /// Replaces the certified δ as the perturbation size.
        #[arg(long)]
        perturbation_scale: Option<ExactScalar>,
    },
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

/// Worker pool capped by `NEWTON_ODOMETER_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| HarnessError::Input(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| HarnessError::Input(format!("cannot start worker pool: {e}")))
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Approximate { common, input } => {
            let cfg = common.load()?;
            commands::approximate::run(&cfg, &input, &common.out)
        }
        Command::ClassifyGrid { common, model, family } => {
            let cfg = common.load()?;
            commands::grid::run(&cfg, &model, &family, &common.out)
        }
        Command::Tower { common, input, primes } => {
            let cfg = common.load()?;
            commands::tower::run(&cfg, &input, primes, &common.out)
        }
        Command::VerifyOdometer { common, alpha, beta, depth, primes } => {
            let cfg = common.load()?;
            commands::odometer::run(&cfg, &alpha, beta.as_deref(), depth, primes, &common.out)
        }
        Command::Contraction { common, model, piece, trials, perturbation_scale } => {
            let cfg = common.load()?;
            let opts = commands::contraction::Options { model, piece, trials, scale: perturbation_scale };
            commands::contraction::run(&cfg, &opts, &common.out)
        }
    }
}
