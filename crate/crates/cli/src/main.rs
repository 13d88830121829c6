//! `rstlab` command-line front end.
//!
//! Exit status: `0` on success, `1` when a check or experiment gate fails,
//! `2` on a configuration or I/O error.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use crate::config::{Check, Cli, Command, Experiment};

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or config values, unreadable inputs, unwritable outputs.
    #[error("configuration error: {0}")]
    Config(String),
    /// A run that could not produce its result.
    #[error("run failed: {0}")]
    Failed(String),
}

impl From<rstlab::Error> for CliError {
    fn from(e: rstlab::Error) -> Self {
        use rstlab::Error as E;
        match e {
            E::InvalidArgument(_) | E::Parse { .. } | E::Io(_) => CliError::Config(e.to_string()),
            E::Precondition(_) | E::Sampling(_) | E::InsufficientData(_) => CliError::Failed(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file = config::load_file(cli.config.as_deref())?;
    let globals = config::resolve_globals(&cli, &file)?;
    match &cli.command {
        Command::Sample(a) => commands::sample(&config::merge(a, &file)?, &globals),
        Command::Build(a) => commands::build(&config::merge(a, &file)?, &globals),
        Command::Explore(a) => commands::explore(&config::merge(a, &file)?, &globals),
        Command::Straightness(a) => commands::straightness(&config::merge(a, &file)?, &globals),
        Command::Experiment(e) => match e {
            Experiment::PsiTail(a) => commands::psi_tail(&config::merge(a, &file)?, &globals),
            Experiment::Deviation(a) => commands::deviation(&config::merge(a, &file)?, &globals),
            Experiment::Spacing(a) => commands::spacing(&config::merge(a, &file)?, &globals),
            Experiment::Symmetry(a) => commands::symmetry(&config::merge(a, &file)?, &globals),
        },
        Command::Check(c) => match c {
            Check::Lemmas(a) => commands::lemmas(&config::merge(a, &file)?, &globals),
            Check::Planarity(a) => commands::planarity(&config::merge(a, &file)?, &globals),
            Check::Tree(a) => commands::tree(&config::merge(a, &file)?, &globals),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("rstlab: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Failed(_) => ExitCode::from(1),
            }
        }
    }
}
