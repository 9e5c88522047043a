use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use super::{compute_embedding, EmbedArgs};
use crate::error::CliError;
use crate::io::{json_bytes, matrix_csv, with_suffix, Outputs, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct EmbedCmd {
    #[command(flatten)]
    pub input: EmbedArgs,
    /// Embedding CSV; the sidecar goes to `<out>.json`
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: u32,
    rank: usize,
    rank_mode: &'a str,
    debiased: bool,
    debias_trace: Option<f64>,
    kept_eigenvalues: &'a [f64],
    eigenvalues: &'a [f64],
    discarded_psd_mass: f64,
}

pub fn run(cmd: &EmbedCmd) -> Result<(), CliError> {
    let outcome = compute_embedding(&cmd.input)?;
    let e = &outcome.embedding;
    let sidecar = Sidecar {
        schema_version: SCHEMA_VERSION,
        rank: e.rank,
        rank_mode: outcome.rank_mode,
        debiased: e.debiased,
        debias_trace: cmd.input.debias_trace,
        kept_eigenvalues: &e.kept_eigenvalues,
        eigenvalues: &e.all_eigenvalues,
        discarded_psd_mass: outcome.discarded_psd_mass,
    };
    let mut outputs = Outputs::default();
    outputs.add(&cmd.out, matrix_csv(&e.coordinates, None));
    outputs.add(with_suffix(&cmd.out, ".json"), json_bytes(&sidecar));
    outputs.commit()?;
    Ok(())
}
