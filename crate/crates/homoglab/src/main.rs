use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homoglab::commands::{self, CellArgs, CheckArgs, EvolveArgs, FibreArgs, Outcome, StudyArgs};
use homoglab::{report, CliError, RayonExecutor};

/// Spectral homogenisation laboratory.
#[derive(Debug, Parser)]
#[command(name = "homoglab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Correctors and homogenised tensors at given quasimomenta.
    Cell(CellArgs),
    /// Fibre error sweep over eps, quasimomentum and Laplace frequency.
    Fibre(FibreArgs),
    /// One heterogeneous and homogenised space-time solve.
    Evolve(EvolveArgs),
    /// Convergence study in eps with fitted rates.
    Study(StudyArgs),
    /// Invariant suites.
    Check(CheckArgs),
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let exec = RayonExecutor::from_env()?;
    match cli.command {
        Command::Cell(a) => commands::cell(a),
        Command::Fibre(a) => commands::fibre(a, &exec),
        Command::Evolve(a) => commands::evolve(a, &exec),
        Command::Study(a) => commands::study(a, &exec),
        Command::Check(a) => commands::check(a, &exec),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = run(cli).and_then(|o| {
        report::write_output(o.output.as_deref(), &o.bytes)?;
        Ok(o)
    });
    match outcome {
        Ok(o) => {
            for line in &o.log {
                eprintln!("{line}");
            }
            ExitCode::from(if o.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
