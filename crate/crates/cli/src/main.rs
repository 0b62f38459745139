//! `lmpc`: generate benchmark networks, certify locality patterns, select
//! the optimal locality size and compare localized against global MPC.
//!
//! Structured results are JSON, sweep and trace data CSV. Every command run
//! with `-o` also writes `<output>.manifest.json`.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{AnalyzeArgs, BenchArgs, GenArgs, SelectArgs, SimArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(name = "lmpc", version, about = "Locality certificates for localized MPC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random swing-equation mesh network.
    Gen(GenArgs),
    /// Find the smallest d-hop locality that preserves global performance.
    Select(SelectArgs),
    /// Certify a single locality pattern.
    Analyze(AnalyzeArgs),
    /// Closed-loop comparison of localized and global MPC.
    Sim(SimArgs),
    /// Locality selection over a grid of generator settings.
    Sweep(SweepArgs),
    /// Time the construction and rank phases of selection.
    Bench(BenchArgs),
}

/// Exit codes beyond clap's usage error (2).
pub mod exit {
    pub const FAILURE: u8 = 1;
    pub const IO: u8 = 3;
    pub const INPUT: u8 = 4;
    pub const INFEASIBLE: u8 = 5;
}

/// A run that wrote its artifacts but must report failure.
#[derive(Debug)]
pub struct Infeasible(pub String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Infeasible>() {
            return exit::INFEASIBLE;
        }
        if cause.is::<std::io::Error>() {
            return exit::IO;
        }
        if cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return exit::INPUT;
        }
        if let Some(e) = cause.downcast_ref::<lmpc_core::Error>() {
            return match e {
                lmpc_core::Error::Io(_) => exit::IO,
                lmpc_core::Error::Json(_) | lmpc_core::Error::Dimension(_) | lmpc_core::Error::Partition(_) => {
                    exit::INPUT
                }
                _ => exit::FAILURE,
            };
        }
    }
    exit::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Gen(a) => commands::gen::run(a, &argv),
        Command::Select(a) => commands::select::run(a, &argv),
        Command::Analyze(a) => commands::analyze::run(a, &argv),
        Command::Sim(a) => commands::sim::run(a, &argv),
        Command::Sweep(a) => commands::sweep::run(a, &argv),
        Command::Bench(a) => commands::bench::run(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
