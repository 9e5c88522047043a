use std::path::PathBuf;

use clap::Args;
use mds_recover::clustering::{pgr_check, RecoveryCertificate};
use mds_recover::{agreement, Algorithm, Error};
use serde::Serialize;

use super::{compute_embedding, EmbedArgs};
use crate::error::CliError;
use crate::io::{labels_csv, read_labels, Outputs, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct ClusterCmd {
    #[command(flatten)]
    pub input: EmbedArgs,
    /// Number of clusters
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// kmeans, single, complete, average or energy
    #[arg(long, default_value = "kmeans", value_parser = parse_algorithm)]
    pub algo: Algorithm,
    /// True labels, one per line; enables the agreement report
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Seed for k-means initialization
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Predicted labels CSV
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    algorithm: String,
    k: usize,
    rank: usize,
    agreement: f64,
    /// Absent when the true labels have a single cluster.
    certificate: Option<RecoveryCertificate>,
}

pub fn run(cmd: &ClusterCmd) -> Result<(), CliError> {
    let k = cmd.k as usize;
    let truth = cmd.labels.as_deref().map(read_labels).transpose()?;
    let outcome = compute_embedding(&cmd.input)?;
    let y = &outcome.embedding.coordinates;
    if let Some(t) = &truth {
        if t.len() != y.nrows() {
            return Err(CliError::usage(format!("{} labels given for {} samples", t.len(), y.nrows())));
        }
    }
    let predicted = cmd.algo.cluster(y, k, cmd.seed)?;
    let report = match &truth {
        Some(t) => {
            let certificate = match pgr_check(y, t) {
                Ok(c) => Some(c),
                Err(Error::SingleCluster) => None,
                Err(e) => return Err(e.into()),
            };
            Some(Report {
                schema_version: SCHEMA_VERSION,
                algorithm: cmd.algo.to_string(),
                k,
                rank: outcome.embedding.rank,
                agreement: agreement(&predicted, t)?,
                certificate,
            })
        }
        None => None,
    };
    let mut outputs = Outputs::default();
    outputs.add(&cmd.out, labels_csv(&predicted));
    outputs.commit()?;
    if let Some(r) = report {
        println!("{}", serde_json::to_string(&r).expect("report serializes"));
    }
    Ok(())
}
