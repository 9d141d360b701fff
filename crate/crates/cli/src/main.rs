//! `ktan` command-line harness.

mod commands;
mod failure;
mod manifest;
mod settings;
mod source;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "ktan",
    version,
    about = "Adaptive sample size truncated Newton solver for regularized logistic regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run k-TAN and write its stage trace as CSV.
    Solve(commands::solve::SolveArgs),
    /// Run several solvers on one dataset and write comparable traces.
    Compare(commands::compare::CompareArgs),
    /// Evaluate the convergence certificates at each stage of a run.
    Check(commands::check::CheckArgs),
    /// Solve a prefix risk to high precision and print the minimizer.
    Oracle(commands::oracle::OracleArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve::run(args),
        Command::Compare(args) => commands::compare::run(args),
        Command::Check(args) => commands::check::run(args),
        Command::Oracle(args) => commands::oracle::run(args),
    };
    if let Err(failure) = result {
        eprintln!("error: {failure}");
        if matches!(failure, failure::Failure::Usage(_)) {
            eprintln!("{}", Cli::command().render_usage());
        }
        std::process::exit(failure.exit_code());
    }
}
