//! Library behind the `brevity` command-line tool: configuration, dataset
//! layout, the subcommands and the two demonstrations.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod commands;
pub mod config;
pub mod data;
pub mod demo;
pub mod report;

pub use app::{run_with, Cli, Command};
pub use commands::Runner;
pub use config::ExperimentConfig;

/// Runs the tool with the process arguments, printing to stdout.
pub fn run() -> anyhow::Result<()> {
    run_with(std::env::args_os(), &mut std::io::stdout().lock())
}
