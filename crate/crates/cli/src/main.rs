use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbmim_cli::{generate, load_config, run_experiment, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "rbmim", version, about = "Drift detection experiments on imbalanced streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Use only this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the stream at this many instances.
    #[arg(long, global = true)]
    length: Option<u64>,
    /// No progress output.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment.
    Run {
        config: PathBuf,
        /// Parallel runs (0 = all cores).
        #[arg(long, short, default_value_t = 0)]
        jobs: usize,
        /// Write results here instead of the configured directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Write a generated stream to CSV.
    Generate {
        generator: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config, jobs, out } => {
            let cfg = load_config(config)?;
            let opts = RunOptions {
                seed: cli.seed,
                length: cli.length,
                output: out.clone(),
                jobs: *jobs,
                quiet: cli.quiet,
            };
            let summary = run_experiment(&cfg, &opts)?;
            if !cli.quiet {
                eprintln!("{} runs written to {}", summary.runs.len(), out.as_ref().unwrap_or(&cfg.output).display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(config)?;
            let opts = RunOptions {
                seed: cli.seed,
                length: cli.length,
                ..Default::default()
            };
            rbmim_cli::runner::effective_config(&cfg, &opts)?;
            if !cli.quiet {
                println!("{}: ok", config.display());
            }
            Ok(())
        }
        Command::Generate { generator, out } => generate(generator, out, cli.seed, cli.length),
    }
}
