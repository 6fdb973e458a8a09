//! The `fvmn` command line: one subcommand per pipeline stage, all sharing
//! a TOML experiment config and one output directory.
//!
//! Output layout under `--out`:
//!
//! ```text
//! config.toml   effective config of the last command
//! data/         snapshot series and manifest
//! model/        checkpoints, scalers, training reports, temperature dataset
//! ablation/     sweep table and ranking
//! rollout/      per-mode reports, summary, per-cell error dumps
//! macnet/       trace, audit, residual series, speedup accounting
//! report/       summary and plot data
//! ```
//!
//! Exit codes: 0 success, 2 configuration, 3 numerical, 4 I/O.

pub mod ablate;
mod commands;
pub mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, ErrorClass, Result};
use crate::experiment::ExperimentConfig;
use crate::rollout::RolloutMode;

pub use commands::{Workspace, ABLATION_DIR, DATA_DIR, MACNET_DIR, MODEL_DIR, REPORT_DIR, ROLLOUT_DIR};

#[derive(Debug, Parser)]
#[command(name = "fvmn", version, about = "Finite-volume network surrogates on a desk-scale flame problem")]
#[command(after_help = "Without --config the built-in desk config is used; `fvmn defaults` prints it.")]
pub struct Cli {
    /// Experiment config (TOML). Every field is required.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for parallel training (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spin up the flame and write the snapshot series.
    Generate,
    /// Train the six surrogate networks on the training window.
    Train {
        /// Series manifest (default: OUT/data/manifest.toml).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Network-size sweep and input/output variant comparison.
    Ablate {
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Evaluate trained surrogates over the test window.
    Rollout {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Checkpoint directory (default: OUT/model).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        mode: ModeArg,
    },
    /// Alternating solver/surrogate run with residual gating.
    Macnet {
        /// Overrides macnet.tolerance; accepts `inf`.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write the per-step residual series.
        #[arg(long)]
        emit_residuals: bool,
    },
    /// Aggregate every artifact in the output directory.
    Report,
    /// Print the built-in desk config.
    Defaults,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Multi,
    Single,
    ConstantGradient,
    All,
}

impl ModeArg {
    pub fn modes(self) -> Vec<RolloutMode> {
        match self {
            ModeArg::Multi => vec![RolloutMode::Multi],
            ModeArg::Single => vec![RolloutMode::Single],
            ModeArg::ConstantGradient => vec![RolloutMode::ConstantGradient],
            ModeArg::All => RolloutMode::ALL.to_vec(),
        }
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

/// Loads the config, applies flag overrides and validates the result.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e).missing("config"))?;
            ExperimentConfig::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::desk(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Macnet { tolerance: Some(t), .. } = cli.command {
        cfg.macnet.tolerance = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Defaults = cli.command {
        print!("{}", ExperimentConfig::desk().to_toml());
        return Ok(());
    }
    if let Command::Report = cli.command {
        let path = report::cmd_report(&cli.out)?;
        println!("{}", path.display());
        return Ok(());
    }
    let ws = Workspace::create(effective_config(cli)?, cli.out.clone())?;
    match &cli.command {
        Command::Generate => {
            let manifest = ws.cmd_generate()?;
            println!("{}", manifest.display());
        }
        Command::Train { manifest } => {
            for p in ws.cmd_train(manifest.as_deref())? {
                println!("{}", p.display());
            }
        }
        Command::Ablate { manifest } => {
            let result = ws.cmd_ablate(manifest.as_deref())?;
            print!("{}", result.ranking_text());
        }
        Command::Rollout { manifest, model, mode } => {
            for p in ws.cmd_rollout(manifest.as_deref(), model.as_deref(), &mode.modes())? {
                println!("{}", p.display());
            }
        }
        Command::Macnet { emit_residuals, .. } => {
            let trace = ws.cmd_macnet(*emit_residuals)?;
            println!("{}", trace.display());
        }
        Command::Report | Command::Defaults => unreachable!("handled above"),
    }
    Ok(())
}

/// Process entry point used by the `fvmn` binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
