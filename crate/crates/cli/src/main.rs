//! `tdyn <command> <config> [--levels L] [--out DIR]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 validation failure,
//! 3 runtime failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use commands::{execute, Command, Failure, Options, EXIT_CONFIG};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Run,
    Validate,
    Kernels,
    BenchGrim1,
    BenchGrim2,
    BenchAngles,
    BenchWetting,
    BenchCounterexample,
    BenchCircle,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Run => Command::Run,
            CommandArg::Validate => Command::Validate,
            CommandArg::Kernels => Command::Kernels,
            CommandArg::BenchGrim1 => Command::BenchGrim1,
            CommandArg::BenchGrim2 => Command::BenchGrim2,
            CommandArg::BenchAngles => Command::BenchAngles,
            CommandArg::BenchWetting => Command::BenchWetting,
            CommandArg::BenchCounterexample => Command::BenchCounterexample,
            CommandArg::BenchCircle => Command::BenchCircle,
        }
    }
}

/// Multiphase threshold-dynamics simulations and benchmarks.
#[derive(Debug, Parser)]
#[command(name = "tdyn", version)]
struct Cli {
    #[arg(value_enum)]
    command: CommandArg,
    /// Experiment configuration file.
    config: PathBuf,
    /// Number of refinement levels for bench-* commands.
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", cli.config.display())))?;
    let config =
        config::parse_config(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", cli.config.display())))?;
    let opts = Options {
        levels: cli.levels,
        out: cli.out,
    };
    execute(cli.command.into(), &config, &opts)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
