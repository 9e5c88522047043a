//! `mds-recover`: embed, cluster, simulate, phase-grid and audit commands.
//!
//! Exit status is 0 on success, 2 for usage or input problems and 3 when the
//! computation rejects the data; the error name is printed on stderr.

mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{audit, cluster, embed, phase, simulate};
use error::CliError;

#[derive(Parser)]
#[command(name = "mds-recover", version, about = "Classical MDS embedding and cluster recovery experiments")]
struct Cli {
    /// Worker threads: a positive integer or `auto`
    #[arg(long, global = true, env = "MDS_RECOVER_THREADS", default_value = "auto")]
    threads: Threads,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a dissimilarity or coordinate matrix
    Embed(embed::EmbedCmd),
    /// Embed, then cluster, optionally scoring against true labels
    Cluster(cluster::ClusterCmd),
    /// Draw a sample from a preset or a model file
    Simulate(simulate::SimulateCmd),
    /// Run a phase grid and fit its recovery boundary
    Phase(phase::PhaseCmd),
    /// Compare noisy and ideal spectra of a simulated model
    Audit(audit::AuditCmd),
}

#[derive(Debug, Clone, Copy)]
enum Threads {
    Auto,
    Count(usize),
}

impl std::str::FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Threads::Auto),
            _ => match s.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Threads::Count(n)),
                _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
            },
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Threads::Count(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Embed(c) => embed::run(c),
        Command::Cluster(c) => cluster::run(c),
        Command::Simulate(c) => simulate::run(c),
        Command::Phase(c) => phase::run(c),
        Command::Audit(c) => audit::run(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
