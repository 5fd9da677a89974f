//! Crate-wide error with a distinct process exit code per module.

use thiserror::Error;

use crate::dataset::IngestError;
use crate::eval::EvalError;
use crate::polynomial::PolyError;
use crate::query::QueryError;
use crate::schema::SchemaError;
use crate::solver::SolverError;
use crate::statistics::StatsError;
use crate::summary::{BuildError, SummaryError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Statistics(#[from] StatsError),
    #[error(transparent)]
    Polynomial(#[from] PolyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl From<BuildError> for Error {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Statistics(e) => Error::Statistics(e),
            BuildError::Polynomial(e) => Error::Polynomial(e),
            BuildError::Solver(e) => Error::Solver(e),
            BuildError::Summary(e) => Error::Summary(e),
        }
    }
}

impl Error {
    /// Process exit code. 2 is left to argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Ingest(_) => 10,
            Error::Statistics(_) => 11,
            Error::Polynomial(_) => 12,
            Error::Solver(_) => 13,
            Error::Query(_) => 14,
            Error::Summary(_) => 15,
            Error::Eval(_) => 16,
        }
    }
}
