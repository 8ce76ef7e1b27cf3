//! Command-line driver: scenario files, the run commands and their outputs.

pub mod commands;
pub mod error;
pub mod output;
pub mod report;
pub mod scenario;
pub mod svg;

pub use error::CliError;
