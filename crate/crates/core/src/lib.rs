//! Maximum-entropy summaries of relational tables.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod oracle;
pub mod polynomial;
pub mod predicate;
pub mod query;
pub mod schema;
pub mod solver;
pub mod statistics;
pub mod summary;

pub use error::Error;
