//! Command-line front end: configuration, verdict files and the suites
//! behind each subcommand.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;

pub use config::RunConfig;
pub use error::CliError;
pub use output::{Check, Outcome, Status};
