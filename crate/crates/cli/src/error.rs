use std::fmt;

use laguerre_rve::{RveError, SolverError, TessellationError};

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or unreadable input (exit 1).
    Usage(String),
    /// The solver or the tessellation failed (exit 2).
    Solver(String),
    /// A validation invariant failed (exit 3).
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Validation(_) => 3,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(format!("csv error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("json error: {e}"))
    }
}

impl From<RveError> for CliError {
    fn from(e: RveError) -> Self {
        match e {
            RveError::DpRequiresEvenN(_)
            | RveError::NoGrains
            | RveError::ExplicitCount { .. }
            | RveError::InvalidParameter(_)
            | RveError::Tessellation(
                TessellationError::SeedOutsideBox(_) | TessellationError::DuplicateSeeds(..),
            ) => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidTarget(_)
            | SolverError::TargetCount { .. }
            | SolverError::InvalidTolerance => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<TessellationError> for CliError {
    fn from(e: TessellationError) -> Self {
        match e {
            TessellationError::SeedOutsideBox(_)
            | TessellationError::DuplicateSeeds(..)
            | TessellationError::NoSeeds => CliError::Usage(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}
