//! Command-line front end: dispatches the subcommands implemented in
//! `spinstar_cli::commands` and maps errors to the documented exit codes
//! (1 config, 2 numerical failure, 3 guard violation).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spinstar_cli::commands;
use spinstar_cli::methods::{DEFAULT_ORACLE_GUARD, MAX_ORACLE_GUARD};
use spinstar_cli::{CliError, Scenario};

#[derive(Parser)]
#[command(
    name = "spinstar",
    version,
    about = "Central-spin model dynamics: exact evolution and approximate solvers",
    after_help = "Exit codes: 0 success, 1 config error, 2 numerical failure, 3 guard violation."
)]
struct Cli {
    /// Raise the brute-force bath-size guard from 8 to 12 spins
    /// (the full Hilbert space grows as 2^N; expect long runs).
    #[arg(long, global = true)]
    allow_large_oracle: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method in the config and write its time series
    Run {
        /// Scenario config file (INI format, see the library docs)
        config: PathBuf,
        /// Output directory (overrides 'output' in [run])
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run methods plus the reference and report errors and horizons
    Compare {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a comparison across parameter values and fit the horizon scaling
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize a built-in figure preset (fig1 .. fig11)
    Preset {
        /// Preset name, e.g. fig4
        name: String,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Check methods against the small-bath brute-force reference
    OracleCheck { config: PathBuf },
}

fn load(config: &PathBuf, oracle_guard: u32) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(config).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", config.display()))
    })?;
    Scenario::from_text(&text, oracle_guard)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let guard = if cli.allow_large_oracle {
        MAX_ORACLE_GUARD
    } else {
        DEFAULT_ORACLE_GUARD
    };
    match cli.command {
        Command::Run { config, out } => {
            commands::cmd_run(&load(&config, guard)?, out.as_deref(), guard)
        }
        Command::Compare { config, out } => {
            commands::cmd_compare(&load(&config, guard)?, out.as_deref(), guard)
        }
        Command::Sweep { config, out } => {
            commands::cmd_sweep(&load(&config, guard)?, out.as_deref(), guard)
        }
        Command::Preset { name, out } => commands::cmd_preset(&name, &out, guard),
        Command::OracleCheck { config } => {
            commands::cmd_oracle_check(&load(&config, guard)?, guard)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
