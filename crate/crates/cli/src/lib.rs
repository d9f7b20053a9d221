//! Library side of the `spinforge` command: configuration, figure drivers,
//! output writing and the invariant suites.

pub mod analytic_query;
pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod selftest;

pub use error::{CliError, CliResult};
