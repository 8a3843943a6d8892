//! `circleflow simulate | verify | chaos`.
//!
//! Exit status: 0 when every check passes, 1 when any fails or a run
//! breaks, 2 on a configuration or usage error.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use circleflow::verify::CheckName;
use clap::{Parser, Subcommand};

use commands::Failure;
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "circleflow", version, about = "Simulate and verify stochastic flows of kernels on a circle graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with any of the flag settings; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write kernel supports from the vertex 1 and rho-chain anchors per replicate.
    Simulate,
    /// Run the named checks and write per-check detail plus a summary.
    Verify,
    /// Tabulate the L2 error of truncated chaos expansions.
    Chaos,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(checks) = &cli.overrides.checks {
        for name in checks {
            if let Err(e) = name.parse::<CheckName>() {
                let mut cmd = <Cli as clap::CommandFactory>::command();
                cmd.error(clap::error::ErrorKind::InvalidValue, e.to_string()).exit();
            }
        }
    }
    let outcome = RunConfig::resolve(cli.config.as_deref(), cli.overrides)
        .map_err(Failure::from)
        .and_then(|cfg| match cli.command {
            Command::Simulate => commands::simulate(&cfg),
            Command::Verify => commands::verify(&cfg),
            Command::Chaos => commands::chaos(&cfg),
        });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
