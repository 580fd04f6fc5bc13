//! Error type shared by all subcommands, carrying the process exit code.
//!
//! The contract: config problems (bad syntax, unknown keys, incompatible
//! method/model combinations) exit with 1, numerical problems (solver
//! breakdown, non-finite output, tolerance violations, I/O failures) with
//! 2, and guard violations (brute-force oracle bath size) with 3.

use spinstar::exact_dynamics::ExactDynamicsError;
use spinstar::master_equations::MasterEquationError;
use spinstar::NumericsError;
use thiserror::Error;

/// Top-level error for the binary; `exit_code` maps each variant to the
/// documented process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unusable configuration; parse errors cite 1-based line numbers.
    #[error("config error: {0}")]
    Config(String),
    /// A solver failed, produced non-finite values, a result missed a
    /// requested tolerance, or an output file could not be written.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A resource guard was hit (oracle bath size over the limit).
    #[error("guard violation: {0}")]
    Guard(String),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Guard(_) => 3,
        }
    }

    /// Config error pointing at a 1-based config line.
    pub fn config_at(line: usize, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("line {line}: {msg}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {err}"))
    }
}

impl From<ExactDynamicsError> for CliError {
    fn from(err: ExactDynamicsError) -> Self {
        match err {
            ExactDynamicsError::BathTooLarge { .. } => CliError::Guard(err.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<MasterEquationError> for CliError {
    fn from(err: MasterEquationError) -> Self {
        CliError::Numerical(err.to_string())
    }
}

impl From<NumericsError> for CliError {
    fn from(err: NumericsError) -> Self {
        CliError::Numerical(err.to_string())
    }
}
