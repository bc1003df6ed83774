use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bois::cli;

/// Parallel Bayesian optimisation with measurement sharing for families of
/// variational quantum eigensolver problems.
#[derive(Parser)]
#[command(name = "bois", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow, shrink and freeze an ansatz circuit for the configured target
    /// state, then write the ansatz file.
    BuildAnsatz(CommonArgs),
    /// Run one optimizer-array experiment and write result tables.
    Run(CommonArgs),
    /// Compare sharing strategies over repeated runs (exact backend only).
    Compare(CommonArgs),
    /// Write the exact ground-state energy table for the configured family.
    Exact(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core). Changes wall-clock time only,
    /// never results.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::BuildAnsatz(args) => {
            cli::cmd_build_ansatz(&args.config, args.seed, args.workers, args.out.as_deref()).map(
                |converged| {
                    if converged {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                },
            )
        }
        Command::Run(args) => {
            cli::cmd_run(&args.config, args.seed, args.workers, args.out.as_deref())
                .map(|()| ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            cli::cmd_compare(&args.config, args.seed, args.workers, args.out.as_deref())
                .map(|()| ExitCode::SUCCESS)
        }
        Command::Exact(args) => cli::cmd_exact(&args.config, args.workers, args.out.as_deref())
            .map(|()| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            // 2 = configuration / input error; 1 is reserved for a
            // non-converged build-ansatz.
            ExitCode::from(2)
        }
    }
}
