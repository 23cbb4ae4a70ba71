//! `hcm` — train magnitude-direction heads, score their unit-norm
//! constraint violation as uncertainty, calibrate it into confidences, and
//! reproduce the bundled desk-scale studies.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data-quality error,
//! 1 internal failure.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hcm_core::error::Error;

#[derive(Parser)]
#[command(name = "hcm", version, about = "Hyperspherical confidence mapping toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print nothing but errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Print extra progress detail.
    #[arg(long, global = true, conflicts_with = "quiet")]
    verbose: bool,
}

#[derive(Args)]
struct OutDir {
    /// Output directory; everything the command writes lands here.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a run config and write the checkpoint.
    Train {
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a dataset with a trained checkpoint.
    Score {
        /// Checkpoint written by `train` (params.json).
        #[arg(long)]
        params: PathBuf,
        /// Dataset CSV (columns x0.., optionally y0..).
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Fit a temperature and confidence normalizer from a scores table.
    Calibrate {
        /// Scores CSV containing `u` and `r` columns.
        #[arg(long)]
        scores: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Confidence normalizer fitted alongside the temperature.
        #[arg(long, default_value = "minmax", value_parser = ["minmax", "quantile"])]
        normalizer: String,
    },
    /// Evaluate the metrics suite over a calibrated scores table.
    Eval {
        /// Scores CSV containing `u` and `r` columns (and optionally
        /// `is_ood`).
        #[arg(long)]
        scores: PathBuf,
        /// Calibration JSON written by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
        #[command(flatten)]
        out: OutDir,
        /// Bin count for the regression calibration error.
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Run a bundled experiment end to end.
    Experiment {
        /// One of: toy1d, two-moons, noise-shift, blob-ood, lambda-sweep.
        name: String,
        /// Run configuration JSON; defaults ship per experiment.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Maps an error onto the documented exit codes.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::DimensionMismatch { .. }
        | Error::CsvHeader { .. }
        | Error::CsvParse { .. }
        | Error::EmptyInput(_) => 2,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        Error::Uncalibratable(_) => 3,
        _ => 1,
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Verbosity {
    quiet: bool,
    verbose: bool,
}

impl Verbosity {
    pub(crate) fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    pub(crate) fn detail(&self, msg: impl AsRef<str>) {
        if self.verbose {
            println!("{}", msg.as_ref());
        }
    }
}

/// Upper bound on worker threads, from HCM_THREADS (default: hardware
/// parallelism). Every computation in this build is single-threaded and
/// deterministic, so the cap is trivially honored; it exists so configs and
/// scripts can set it ahead of a parallel build.
pub(crate) fn thread_cap() -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var("HCM_THREADS") {
        Ok(v) => v.parse::<usize>().ok().filter(|n| *n >= 1).map_or(hw, |n| n.min(hw)),
        Err(_) => hw,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbosity = Verbosity {
        quiet: cli.quiet,
        verbose: cli.verbose,
    };
    let result = match cli.command {
        Command::Train { config, out, seed } => {
            commands::cmd_train(&config, &out.out, seed, verbosity)
        }
        Command::Score { params, data, out } => {
            commands::cmd_score(&params, &data, &out.out, verbosity)
        }
        Command::Calibrate {
            scores,
            out,
            normalizer,
        } => commands::cmd_calibrate(&scores, &out.out, &normalizer, verbosity),
        Command::Eval {
            scores,
            calibration,
            out,
            bins,
        } => commands::cmd_eval(&scores, &calibration, &out.out, bins, verbosity),
        Command::Experiment {
            name,
            config,
            out,
            seed,
        } => commands::cmd_experiment(&name, config.as_deref(), &out.out, seed, verbosity),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
