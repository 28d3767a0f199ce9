//! Command implementations behind the `fuselect` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, CliResult};
