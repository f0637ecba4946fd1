//! Command-line laboratory: configs, subcommands and output files.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

pub use cli::{execute, run, Cli};
pub use config::LabConfig;
pub use output::{Check, RunSummary};
