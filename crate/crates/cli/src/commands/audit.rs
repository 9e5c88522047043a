use std::path::PathBuf;

use clap::Args;
use mds_recover::diagnostics::{audit_replicates, median, PerturbationReport};
use mds_recover::rng::derive_seed;
use serde::Serialize;

use super::simulate::Truth;
use crate::error::CliError;
use crate::io::{json_bytes, read_record, with_suffix, Outputs, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct AuditCmd {
    /// Prefix given to `simulate`; reads `<prefix>_truth.json`
    pub truth_prefix: PathBuf,
    /// Rank to audit; defaults to the model's ideal rank
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rank: Option<u64>,
    /// Independent samples per noise level
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Base seed; defaults to the truth file's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also audit the model at each of these noise scales (comma-separated)
    #[arg(long, value_delimiter = ',')]
    pub sigma_sweep: Vec<f64>,
    /// Output JSON; defaults to `<prefix>_audit.json`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Medians {
    eigvec_err_max: f64,
    embed_err_max: f64,
    spec_norm_p: f64,
    weyl_max_deviation: f64,
}

#[derive(Serialize)]
struct SweepLevel {
    sigma: f64,
    medians: Medians,
    weyl_holds: bool,
}

#[derive(Serialize)]
struct AuditFile {
    schema_version: u32,
    rank: usize,
    reps: usize,
    seed: u64,
    sigma: f64,
    reports: Vec<PerturbationReport>,
    medians: Medians,
    /// `|λ̃_i − λ_i| ≤ ‖P‖₂` (plus 1e-8) held in every replicate.
    weyl_holds: bool,
    sweep: Vec<SweepLevel>,
    /// Present only with a sweep of at least two levels.
    medians_increasing_in_sigma: Option<bool>,
}

const WEYL_SLACK: f64 = 1e-8;

fn summarize(reports: &[PerturbationReport]) -> (Medians, bool) {
    let pick = |f: fn(&PerturbationReport) -> f64| median(&reports.iter().map(f).collect::<Vec<_>>());
    let medians = Medians {
        eigvec_err_max: pick(|r| r.eigvec_err_max),
        embed_err_max: pick(|r| r.embed_err_max),
        spec_norm_p: pick(|r| r.spec_norm_p),
        weyl_max_deviation: pick(|r| r.weyl_max_deviation),
    };
    let weyl = reports.iter().all(|r| r.weyl_max_deviation <= r.spec_norm_p + WEYL_SLACK);
    (medians, weyl)
}

pub fn run(cmd: &AuditCmd) -> Result<(), CliError> {
    let truth_path = with_suffix(&cmd.truth_prefix, "_truth.json");
    let truth: Truth = read_record(&truth_path)?;
    if truth.schema_version != SCHEMA_VERSION {
        return Err(CliError::usage(format!(
            "{}: unsupported schema_version {}",
            truth_path.display(),
            truth.schema_version
        )));
    }
    let model = truth.model;
    model.validate()?;
    let rank = cmd.rank.map_or(truth.rank, |r| r as usize);
    let reps = cmd.reps as usize;
    let seed = cmd.seed.unwrap_or(truth.seed);
    let reports = audit_replicates(&model, rank, reps, seed)?;
    let (medians, weyl_holds) = summarize(&reports);
    let mut sweep = Vec::with_capacity(cmd.sigma_sweep.len());
    for (level, &sigma) in cmd.sigma_sweep.iter().enumerate() {
        let swept = model.with_sigma(sigma);
        swept.validate()?;
        let level_seed = derive_seed(seed, "sigma-sweep", &[level as u64]);
        let (medians, weyl_holds) = summarize(&audit_replicates(&swept, rank, reps, level_seed)?);
        sweep.push(SweepLevel { sigma, medians, weyl_holds });
    }
    let medians_increasing_in_sigma = (sweep.len() >= 2).then(|| {
        let mut order: Vec<&SweepLevel> = sweep.iter().collect();
        order.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
        order.windows(2).all(|w| w[0].medians.embed_err_max < w[1].medians.embed_err_max)
    });
    let file = AuditFile {
        schema_version: SCHEMA_VERSION,
        rank,
        reps,
        seed,
        sigma: model.covariance.sigma,
        reports,
        medians,
        weyl_holds,
        sweep,
        medians_increasing_in_sigma,
    };
    let out = cmd.out.clone().unwrap_or_else(|| with_suffix(&cmd.truth_prefix, "_audit.json"));
    let mut outputs = Outputs::default();
    outputs.add(out, json_bytes(&file));
    outputs.commit()?;
    Ok(())
}
