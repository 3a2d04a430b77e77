//! Command-line front end: configuration, run orchestration and file output.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod sweep;

pub use cli::Cli;
pub use commands::{run, Outcome};
pub use error::CliError;
