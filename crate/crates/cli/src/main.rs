use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};

use homodyne_cli::commands;
use homodyne_cli::config::{ExperimentConfig, PathChoice, Preset};
use homodyne_cli::error::{CliError, CliResult};

/// Simulate noisy homodyne detection of a cat state and reconstruct its
/// Wigner function.
#[derive(Debug, Parser)]
#[command(name = "homodyne", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration layered over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base parameter set.
    #[arg(long, global = true, value_enum, default_value = "paper")]
    preset: Preset,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Binned reconstruction (default).
    #[arg(long, global = true, conflicts_with = "exact")]
    fast: bool,

    /// Direct summation over every sample.
    #[arg(long, global = true)]
    exact: bool,

    /// Increase log verbosity.
    #[arg(long, short, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one batch of homodyne pairs per replicate.
    Sample {
        /// Also write `x,phi` CSV next to each batch.
        #[arg(long)]
        csv: bool,
    },
    /// Reconstruct grids from batches (default: every replicate of the config).
    Reconstruct {
        batches: Vec<PathBuf>,
        /// Also write `q,p,w` CSV for every replicate grid.
        #[arg(long)]
        csv: bool,
    },
    /// Error and witness statistics of the reconstructed grids.
    Analyze,
    /// Error bound and witness curves over β.
    SweepBeta,
    /// Numeric and bound error per β.
    Table1 {
        /// Run sample, reconstruct and analyze first.
        #[arg(long)]
        run: bool,
    },
    /// Print the effective configuration.
    Config,
}

fn effective_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(cli.preset, cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.run.workers = w;
    }
    if let Some(o) = &cli.output {
        cfg.run.output = o.clone();
    }
    if cli.fast {
        cfg.run.method = PathChoice::Fast;
    }
    if cli.exact {
        cfg.run.method = PathChoice::Exact;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = effective_config(&cli)?;
    if cfg.run.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("run.workers: {e}")))?;
    }
    match cli.command {
        Command::Sample { csv } => {
            for p in commands::sample(&cfg, csv)? {
                println!("{}", p.display());
            }
        }
        Command::Reconstruct { batches, csv } => {
            for p in commands::reconstruct(&cfg, &batches, csv)? {
                println!("{}", p.display());
            }
        }
        Command::Analyze => {
            let reports = commands::analyze(&cfg)?;
            for r in &reports {
                println!("{}", commands::report_path(&cfg.run.output, r.beta).display());
            }
            print!("{}", commands::table1(&cfg, false)?);
        }
        Command::SweepBeta => {
            for p in commands::sweep_beta(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Table1 { run } => print!("{}", commands::table1(&cfg, run)?),
        Command::Config => print!("{}", cfg.to_toml()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("homodyne: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
