//! Scenario files, reports, CSV output and property suites around `petc-core`.

pub mod commands;
pub mod config;
mod error;
pub mod example;
pub mod output;
pub mod random;
pub mod report;
pub mod verify;

pub use error::CliError;
