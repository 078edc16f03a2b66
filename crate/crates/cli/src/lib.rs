//! Command-line front end: load or build a system, run checks, build chain
//! families, integrate Hamiltonian flows and export definitions.
//!
//! Exit codes are a stable contract: 0 when everything passed, 1 when a check
//! or drift bound failed, 2 for usage and parse errors.

pub mod args;
mod commands;

use std::fs;
use std::path::Path;

use involute::catalog::CatalogError;
use involute::construct::ConstructError;
use involute::dynamics::DynamicsError;
use involute::expr::ExprError;
use involute::poisson::PoissonError;
use thiserror::Error;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_FAILED,
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Verification { .. } => CliError::Failed(e.to_string()),
            CatalogError::Construct(c) => c.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<ConstructError> for CliError {
    fn from(e: ConstructError) -> Self {
        match e {
            ConstructError::NotPoisson { .. }
            | ConstructError::NotCasimir { .. }
            | ConstructError::NotInInvolution { .. }
            | ConstructError::ChainStage { .. } => CliError::Failed(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<PoissonError> for CliError {
    fn from(e: PoissonError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Text produced by a command and whether all of its checks passed.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub passed: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_FAILED
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    commands::dispatch(cli)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub(crate) fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}
