//! Command-line surface over the core library: dataset scoring, simulation
//! runs, run comparison, and region-extraction diagnostics.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod records;

pub use error::CliError;
