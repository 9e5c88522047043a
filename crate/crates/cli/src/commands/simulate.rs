use std::path::PathBuf;

use clap::Args;
use mds_recover::datagen::{sample, CovarianceKind};
use mds_recover::diagnostics::{ideal_rank, model_stats, ModelStats};
use mds_recover::{ClusterModel, Preset};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{json_bytes, labels_csv, matrix_csv, read_config, with_suffix, Outputs, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// Model JSON (`means`, `sizes`, `covariance`, optional `seed`)
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Simulation preset: 1a, 1b, 1c, 2a, ..., 2f
    #[arg(long)]
    pub preset: Option<String>,
    /// Sample size (preset only)
    #[arg(long = "n", alias = "N", requires = "preset")]
    pub n: Option<usize>,
    /// Dimension (preset only)
    #[arg(long, requires = "preset")]
    pub d: Option<usize>,
    /// Noise scale; overrides the config's value, presets default to 1
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed for the k-NN covariance points (preset only)
    #[arg(long, default_value_t = 0, requires = "preset")]
    pub knn_seed: u64,
    /// Sampling seed; overrides the config's value
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes `<prefix>_X.csv`, `_means.csv`, `_labels.csv` and `_truth.json`
    #[arg(long)]
    pub out_prefix: PathBuf,
}

/// Truth record read back by `audit`.
#[derive(Serialize, Deserialize)]
pub struct Truth {
    pub schema_version: u32,
    pub preset: Option<String>,
    pub seed: u64,
    pub sigma: f64,
    pub covariance_kind: CovarianceKind,
    /// Rank of the ideal Gram matrix; the default audit rank.
    pub rank: usize,
    #[serde(skip_deserializing)]
    pub stats: Option<ModelStats>,
    pub model: ClusterModel,
}

fn from_config(cmd: &SimulateCmd, path: &std::path::Path) -> Result<(ClusterModel, u64), CliError> {
    // The seed is split off so the rest parses strictly as a model.
    let mut value: serde_json::Value = read_config(path)?;
    let seed = match value.as_object_mut().and_then(|o| o.remove("seed")) {
        None => None,
        Some(s) => Some(
            s.as_u64()
                .ok_or_else(|| CliError::usage(format!("{}: seed must be a nonnegative integer", path.display())))?,
        ),
    };
    let mut model: ClusterModel = serde_json::from_value(value)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    model.validate()?;
    if let Some(sigma) = cmd.sigma {
        model = model.with_sigma(sigma);
        model.validate()?;
    }
    Ok((model, cmd.seed.or(seed).unwrap_or(0)))
}

pub fn run(cmd: &SimulateCmd) -> Result<(), CliError> {
    let (model, seed, preset) = match (&cmd.preset, &cmd.config) {
        (Some(name), _) => {
            let preset: Preset = name.parse()?;
            let (n0, d0) = preset.default_shape();
            let model = preset.model_with_seed(
                cmd.n.unwrap_or(n0),
                cmd.d.unwrap_or(d0),
                cmd.sigma.unwrap_or(1.0),
                cmd.knn_seed,
            )?;
            (model, cmd.seed.unwrap_or(0), Some(preset.name().to_string()))
        }
        (None, Some(path)) => {
            let (model, seed) = from_config(cmd, path)?;
            (model, seed, None)
        }
        (None, None) => return Err(CliError::usage("either --preset or --config is required")),
    };
    let samples = sample(&model, seed)?;
    let rank = ideal_rank(&model);
    let stats = if rank >= 1 { Some(model_stats(&model, rank)?) } else { None };
    let truth = Truth {
        schema_version: SCHEMA_VERSION,
        preset,
        seed,
        sigma: model.covariance.sigma,
        covariance_kind: model.covariance.kind,
        rank,
        stats,
        model,
    };
    let mut outputs = Outputs::default();
    outputs.add(with_suffix(&cmd.out_prefix, "_X.csv"), matrix_csv(&samples.x, None));
    outputs.add(with_suffix(&cmd.out_prefix, "_means.csv"), matrix_csv(&samples.mean_rows, None));
    outputs.add(with_suffix(&cmd.out_prefix, "_labels.csv"), labels_csv(&samples.labels));
    outputs.add(with_suffix(&cmd.out_prefix, "_truth.json"), json_bytes(&truth));
    outputs.commit()?;
    Ok(())
}
