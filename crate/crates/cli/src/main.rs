//! `thermosched`: estimate entropy curves, build schedules, sample, evaluate
//! and reproduce the toy experiments. Stages exchange CSV/JSON files only.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thermosched_core::Error;

pub use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "thermosched", version, about = "Entropic and Wasserstein sampling schedules for discrete diffusion")]
pub struct Cli {
    /// TOML file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct DiffusionArgs {
    /// Rate kernel: uniform or absorbing.
    #[arg(long)]
    pub kernel: Option<String>,
    /// Dataset: binomial or countdown.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Binomial trials (vocabulary is trials + 1).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Binomial success probability.
    #[arg(long)]
    pub p: Option<f64>,
    /// Countdown sequence length.
    #[arg(long)]
    pub length: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate entropy and Wasserstein curves on a time grid.
    Estimate {
        #[command(flatten)]
        diffusion: DiffusionArgs,
        /// `oracle` or the path of a trained network.
        #[arg(long)]
        score: Option<String>,
        /// Samples per grid point.
        #[arg(long)]
        n: Option<usize>,
        /// Grid points.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Wasserstein bound: activity-nonadiabatic, activity-total or mobility-total.
        #[arg(long)]
        mode: Option<String>,
        /// Also write exact enumeration curves (binomial data only).
        #[arg(long)]
        exact: bool,
    },
    /// Build a schedule from a curves file.
    Schedule {
        #[command(flatten)]
        diffusion: DiffusionArgs,
        /// uniform, eds or wds.
        #[arg(long)]
        strategy: Option<String>,
        /// Number of steps.
        #[arg(short = 'K', long = "k")]
        k: Option<usize>,
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate sequences along a schedule.
    Sample {
        #[command(flatten)]
        diffusion: DiffusionArgs,
        #[arg(long)]
        sched: Option<PathBuf>,
        #[arg(long)]
        score: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output samples file; metadata goes to `<out>.meta.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a samples file.
    Eval {
        task: EvalTask,
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Reference distribution for tv/hellinger: binomial.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        /// Output CSV (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a complete experiment into an artifact directory.
    Reproduce {
        experiment: Experiment,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Training steps of the score network (0 skips the binomial model column).
        #[arg(long)]
        steps: Option<usize>,
        /// Use this trained network instead of training (countdown).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        /// Comma-separated step counts (countdown).
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<usize>>,
        /// Sequences per (K, strategy) cell (countdown).
        #[arg(long)]
        eval_count: Option<usize>,
    },
    /// Train a score network.
    Train {
        #[command(flatten)]
        diffusion: DiffusionArgs,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output parameter file; losses go to `<out>.loss.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Countdown,
    Tv,
    Hellinger,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Binomial,
    Countdown,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
