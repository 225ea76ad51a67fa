//! Command-line front end: single scenarios, dataset builds and scoring.

pub mod config;
pub mod eval;
pub mod render;
pub mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crackwave::dataset::{build_dataset, BuildOptions, DatasetConfig};
use crackwave::metrics::Averaging;
use crackwave::{Error, ErrorClass, Result};

use crate::eval::EvalOptions;
use crate::simulate::SimulateOptions;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Io => EXIT_IO,
    }
}

#[derive(Debug, Parser)]
#[command(name = "crackwave", version, about = "Lattice wave simulation, crack datasets and detection scoring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// 3040 train / 320 test samples of 81 x 2000 x 2.
    Paper,
    /// 64 train / 16 test samples, 200 steps, 1000 particles.
    Desk,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write its receiver record.
    Simulate {
        /// TOML scenario; built-in 10 cm plate when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the plate seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write a full-field frame image every N steps.
        #[arg(long, value_name = "N")]
        frames: Option<usize>,
        /// Also run the cracked twin and print arrival times side by side.
        #[arg(long)]
        with_crack: bool,
    },
    /// Build a dataset; rerunning after a failure resumes it.
    GenDataset {
        /// TOML dataset recipe.
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
    },
    /// Score prediction directories against a dataset's test split.
    Eval {
        /// Dataset manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of `.wprd` files; repeat for one table row per run.
        #[arg(long, required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = crackwave::metrics::DEFAULT_T_BIN)]
        t_bin: f64,
        #[arg(long, default_value_t = crackwave::metrics::DEFAULT_T_TOL)]
        t_tol: f64,
        /// Average per-sample precision and recall instead of pooling counts.
        #[arg(long)]
        macro_average: bool,
        /// Binarizing thresholds for the IoU histograms, comma separated.
        #[arg(long, value_delimiter = ',')]
        hist_t_bins: Option<Vec<f64>>,
        /// Crack-size cutoffs for the adjusted accuracy curve, comma separated.
        #[arg(long, value_delimiter = ',')]
        cutoffs: Option<Vec<f64>>,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            frames,
            with_crack,
        } => {
            let mut cfg = config::load_simulate_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.plate.seed = s;
            }
            let report = simulate::cmd_simulate(&cfg, &out, &SimulateOptions { frames, with_crack })?;
            log::info!(
                "wrote {} record(s) and {} frame(s) to {}",
                report.records.len(),
                report.frames.len(),
                out.display()
            );
        }
        Command::GenDataset {
            config,
            preset,
            seed,
            out,
            workers,
        } => {
            let mut cfg = match (config, preset) {
                (Some(path), _) => config::load_dataset_config(&path)?,
                (None, Some(Preset::Paper)) => DatasetConfig::paper_scale(),
                (None, Some(Preset::Desk) | None) => DatasetConfig::desk_scale(64, 16, 200, 1000),
            };
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            cfg.validate()?;
            let report = build_dataset(&cfg, &out, &BuildOptions { workers })?;
            println!(
                "{} samples ({} train, {} test; {} generated, {} reused) -> {}",
                report.manifest.counts.total,
                report.manifest.counts.train.total(),
                report.manifest.counts.test.total(),
                report.generated,
                report.reused,
                report.manifest_path.display()
            );
        }
        Command::Eval {
            manifest,
            predictions,
            out,
            t_bin,
            t_tol,
            macro_average,
            hist_t_bins,
            cutoffs,
        } => {
            let defaults = EvalOptions::default();
            let options = EvalOptions {
                t_bin,
                t_tol,
                averaging: if macro_average { Averaging::Macro } else { Averaging::Micro },
                hist_t_bins: hist_t_bins.unwrap_or(defaults.hist_t_bins),
                cutoffs: cutoffs.unwrap_or(defaults.cutoffs),
                ..defaults
            };
            eval::cmd_eval(&manifest, &predictions, &out, &options)?;
        }
    }
    Ok(())
}

/// Entry point shared by the binary: parses arguments, runs, maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
