//! `ltv` command-line driver: subcommands that run the experiments of
//! `ltv-core` and write their data files with a run manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

/// Runs one parsed invocation and returns the path of the manifest it wrote.
pub fn run(cli: &Cli) -> CliResult<std::path::PathBuf> {
    commands::dispatch(cli)
}
