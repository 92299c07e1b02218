mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convdens::{Error, Result};

use commands::EstimateOptions;
use config::{CommonArgs, Resolved};

/// Adaptive pointwise density estimation from contaminated observations.
#[derive(Debug, Parser)]
#[command(name = "convdens", version, about)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the density of a sample with pointwise bandwidth selection.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample CSV (one observation per row, optional header).
        #[arg(long)]
        sample: PathBuf,
        /// CSV of evaluation points; defaults to a regular grid over the sample range.
        #[arg(long, conflicts_with = "eval_count")]
        eval_points: Option<PathBuf>,
        /// Points per axis of the automatic evaluation grid.
        #[arg(long)]
        eval_count: Option<usize>,
        /// Print the bandwidth grid summary to stderr.
        #[arg(long)]
        describe_grid: bool,
        /// Clip negative estimates at zero and report the clipped mass.
        #[arg(long)]
        clip_nonnegative: bool,
        /// Also write the per-member R̂ and objective values.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Draw a sample from the configured target and contamination model.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample size.
        #[arg(long)]
        n: usize,
    },
    /// Monte Carlo risk experiment against the fixed-bandwidth oracle.
    Benchmark {
        #[command(flatten)]
        common: CommonArgs,
        /// Sample sizes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Replicates per sample size.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Synthesize a deconvolution kernel and report its constants.
    InspectKernel {
        #[command(flatten)]
        common: CommonArgs,
        /// Bandwidth, one value or one per axis (comma-separated).
        #[arg(long, value_delimiter = ',', default_value = "1")]
        h: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match cli.command {
        Command::Estimate { common, sample, eval_points, eval_count, describe_grid, clip_nonnegative, diagnostics } => {
            let cfg = Resolved::from_args(&common, None, None)?;
            let opts = EstimateOptions { sample, eval_points, eval_count, describe_grid, clip_nonnegative, diagnostics };
            commands::estimate(&cfg, &common.out, &opts)
        }
        Command::Simulate { common, n } => {
            let cfg = Resolved::from_args(&common, Some(vec![n]), None)?;
            commands::simulate(&cfg, &common.out, n)
        }
        Command::Benchmark { common, n, replicates } => {
            let cfg = Resolved::from_args(&common, n, replicates)?;
            let table = commands::benchmark(&cfg, &common.out)?;
            print!("{table}");
            Ok(())
        }
        Command::InspectKernel { common, h } => {
            let cfg = Resolved::from_args(&common, None, None)?;
            commands::inspect_kernel(&cfg, &common.out, &h)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({ "kind": e.kind(), "message": e.to_string() });
            eprintln!("{report}");
            ExitCode::from(2)
        }
    }
}
