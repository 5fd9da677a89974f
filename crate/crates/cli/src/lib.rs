//! Command line and HTTP front ends for maximum-entropy summaries.

pub mod commands;
pub mod service;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] maxent_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("service error: {0}")]
    Service(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Module errors keep the core codes; 2 is bad usage, 17 the service and
    /// 18 output files.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Service(_) => 17,
            CliError::Io { .. } => 18,
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

from_core!(
    maxent_core::schema::SchemaError,
    maxent_core::dataset::IngestError,
    maxent_core::statistics::StatsError,
    maxent_core::solver::SolverError,
    maxent_core::query::QueryError,
    maxent_core::summary::SummaryError,
    maxent_core::summary::BuildError,
    maxent_core::eval::EvalError
);
