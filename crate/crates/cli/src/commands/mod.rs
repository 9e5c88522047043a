pub mod audit;
pub mod cluster;
pub mod embed;
pub mod phase;
pub mod simulate;

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use mds_recover::cmds::{
    double_center, psd_clip, select_rank_eigenratio, CmdsSpectrum, EIGENRATIO_FLOOR,
};
use mds_recover::{DissimilarityMatrix, Embedding};

use crate::error::CliError;
use crate::io::read_matrix;

/// `--rank` value: a fixed positive rank or eigenratio selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankArg {
    Fixed(usize),
    Auto,
}

impl FromStr for RankArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(RankArg::Auto),
            _ => match s.parse::<usize>() {
                Ok(r) if r >= 1 => Ok(RankArg::Fixed(r)),
                _ => Err(format!("expected a positive integer or 'auto', got '{s}'")),
            },
        }
    }
}

/// Input matrix and embedding flags shared by `embed` and `cluster`.
#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// N x N dissimilarity CSV, or N x d coordinates with --coords
    pub input: PathBuf,
    /// Treat the input as coordinates (rows are samples)
    #[arg(long)]
    pub coords: bool,
    /// The dissimilarities are already squared
    #[arg(long, conflicts_with = "coords")]
    pub squared: bool,
    /// Clip negative eigenvalues of the centered matrix before embedding
    #[arg(long)]
    pub psd_project: bool,
    /// Embedding rank, or `auto` for eigenratio selection
    #[arg(long, default_value = "auto")]
    pub rank: RankArg,
    /// Known noise trace subtracted from the kept eigenvalues
    #[arg(long)]
    pub debias_trace: Option<f64>,
}

pub struct EmbedOutcome {
    pub embedding: Embedding,
    pub discarded_psd_mass: f64,
    pub rank_mode: &'static str,
}

pub fn compute_embedding(args: &EmbedArgs) -> Result<EmbedOutcome, CliError> {
    let input = read_matrix(&args.input)?;
    let mut discarded_psd_mass = 0.0;
    let spectrum = if args.coords {
        // Coordinates are Euclidean, so projection would discard nothing.
        CmdsSpectrum::from_coordinates(&input)?
    } else {
        let dissimilarity = if args.squared {
            DissimilarityMatrix::from_squared(input, !args.psd_project)?
        } else {
            DissimilarityMatrix::from_distances(input, !args.psd_project)?
        };
        let mut b = double_center(&dissimilarity);
        if args.psd_project {
            let (clipped, mass) = psd_clip(&b)?;
            b = clipped;
            discarded_psd_mass = mass;
        }
        CmdsSpectrum::from_gram(&b)?
    };
    let (rank, rank_mode) = match args.rank {
        RankArg::Fixed(r) => (r, "fixed"),
        RankArg::Auto => (select_rank_eigenratio(spectrum.eigenvalues(), EIGENRATIO_FLOOR)?, "auto"),
    };
    let mut embedding = spectrum.embed(rank)?;
    if let Some(trace) = args.debias_trace {
        embedding = embedding.debias(trace)?;
    }
    Ok(EmbedOutcome { embedding, discarded_psd_mass, rank_mode })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_argument_parses() {
        assert_eq!("auto".parse::<RankArg>(), Ok(RankArg::Auto));
        assert_eq!("3".parse::<RankArg>(), Ok(RankArg::Fixed(3)));
        assert!("0".parse::<RankArg>().is_err());
        assert!("two".parse::<RankArg>().is_err());
    }
}
