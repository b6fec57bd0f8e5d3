//! Agentic schema linking and SQL generation over relational catalogs.
//!
//! The pipeline links a natural-language question to the minimal set of
//! database columns needed to answer it: an initial vector retrieval
//! seeds the linked schema, then a policy-driven agent loop grows it by
//! probing the database with exploratory SQL, searching column
//! documentation semantically, and verifying hypotheses. Downstream,
//! SQL candidates are sampled against the linked schema, corrected
//! iteratively, and voted on by execution results. An evaluation
//! harness scores strict schema recall and execution accuracy over
//! benchmark suites.

pub mod agent;
pub mod config;
pub mod dbenv;
pub mod error;
pub mod eval;
pub mod policy;
pub mod schema;
pub mod sqlgen;
pub mod template;
pub mod vecstore;

mod fnv;

#[cfg(test)]
pub(crate) mod testhttp;

pub use error::{Error, Result};
