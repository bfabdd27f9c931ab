use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::{cmd_convergence, cmd_infsup, cmd_properties, CommandError, GlobalOptions};

/// Convergence studies, invariant suites and inf-sup scans for perturbed
/// Hodge Laplace problems.
///
/// Exit status: 0 when every verdict passes, 1 when a verdict fails,
/// 2 on configuration, solver or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "feec", version)]
struct Cli {
    /// Mesh and solver seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for report files given by relative paths.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Rate tolerance (convergence) or slope tolerance (infsup).
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a refinement study and write CSV and Markdown reports.
    Convergence { config: PathBuf },
    /// Run invariant suites: all, mesh, spaces, hodge or perturbed.
    Properties { selector: String },
    /// Estimate inf-sup constants under refinement.
    Infsup { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = GlobalOptions { seed: cli.seed, out_dir: cli.out_dir, tolerance: cli.tolerance };
    let result: Result<bool, CommandError> = match &cli.command {
        Command::Convergence { config } => cmd_convergence(config, &opts),
        Command::Properties { selector } => cmd_properties(selector, &opts),
        Command::Infsup { config } => cmd_infsup(config, &opts),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
