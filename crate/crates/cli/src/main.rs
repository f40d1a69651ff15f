//! `lcq`: train reference nets, compress them with DC, iDC or LC, quantize
//! weight files, sweep width and codebook size, and summarize outputs.

mod commands;
mod config;
mod data;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Method, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "lcq", version, about = "Learning-compression quantization of neural network weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompressionArgs {
    /// adaptive, binary, binary_scale, ternary, ternary_scale, pow2:<c>, fixed:<v1>,<v2>,...
    #[arg(long)]
    scheme: Option<String>,
    /// Codebook size for the adaptive scheme.
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    growth: Option<f64>,
    /// Outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a reference model and save it as a checkpoint.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Quantize a reference model.
    Compress {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        comp: CompressionArgs,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Reference checkpoint; trained from scratch when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Apply one compression step to a text file of weights.
    Quantize {
        /// Numbers separated by whitespace or commas.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value = "adaptive")]
        scheme: String,
        #[arg(long = "K", default_value_t = 2)]
        k: usize,
        /// Output file; defaults next to the input.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        float_bits: u32,
    },
    /// LC over a grid of hidden widths and codebook sizes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        comp: CompressionArgs,
    },
    /// Summarize checkpoints, traces and sweep results.
    Report {
        /// Files or output directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(run: &RunArgs, comp: Option<&CompressionArgs>, method: Option<Method>) -> Result<RunConfig, CliError> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut o = Overrides { seed: run.seed, out: run.out.clone(), method, ..Default::default() };
    if let Some(c) = comp {
        o.scheme = c.scheme.clone();
        o.k = c.k;
        o.mu0 = c.mu0;
        o.growth = c.growth;
        o.iters = c.iters;
        o.tolerance = c.tolerance;
    }
    cfg.apply(&o);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { run } => {
            let cfg = load_config(&run, None, None)?;
            commands::train(&cfg, run.config.as_deref())
        }
        Command::Compress { run, comp, method, weights } => {
            let cfg = load_config(&run, Some(&comp), method)?;
            commands::compress(&cfg, run.config.as_deref(), weights.as_deref())
        }
        Command::Quantize { weights, scheme, k, out, seed, float_bits } => commands::quantize(&commands::QuantizeArgs {
            weights: &weights,
            scheme: &scheme,
            k,
            out: out.as_deref(),
            seed,
            float_bits,
        }),
        Command::Sweep { run, comp } => {
            let cfg = load_config(&run, Some(&comp), None)?;
            commands::sweep(&cfg, run.config.as_deref())
        }
        Command::Report { paths, out } => commands::report(&paths, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lcq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
