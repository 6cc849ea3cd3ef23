//! Command-line front end: configuration, serialization and subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::run_command;
pub use config::{load_config, parse_config, InitSpec, Outputs, RunConfig};
pub use error::CliError;
