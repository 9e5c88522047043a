//! Clustering with exact-recovery guarantees, the agreement score and the
//! perfect-geometric-representation certificate.

mod agreement;
mod certificate;
mod hierarchical;
mod kmeans;
mod labels;

pub use agreement::{
    agreement, agreement_brute_force, agreement_matching, confusion_matrix, BRUTE_FORCE_MAX_K,
};
pub use certificate::{pgr_check, RecoveryCertificate};
pub use hierarchical::{hierarchical, hierarchical_naive, linkage_distance, threshold_components, Linkage};
pub use kmeans::{
    is_single_move_local_minimum, kmeans, kmeans_objective, kmeans_with, KMeansObjective,
    KMeansOptions, KMeansResult,
};
pub use labels::LabelVector;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A clustering method with known `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    KMeans,
    Hierarchical(Linkage),
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::KMeans,
        Algorithm::Hierarchical(Linkage::Single),
        Algorithm::Hierarchical(Linkage::Complete),
        Algorithm::Hierarchical(Linkage::Average),
        Algorithm::Hierarchical(Linkage::Energy),
    ];

    /// Runs the method; `seed` only matters for k-means.
    pub fn cluster(self, y: &DMatrix<f64>, k: usize, seed: u64) -> Result<LabelVector> {
        match self {
            Algorithm::KMeans => Ok(kmeans_with(y, k, seed, KMeansOptions::default())?.labels),
            Algorithm::Hierarchical(l) => hierarchical(y, k, l),
        }
    }
}

impl Default for Algorithm {
    fn default() -> Self {
        Algorithm::Hierarchical(Linkage::Single)
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "kmeans" {
            return Ok(Algorithm::KMeans);
        }
        s.parse::<Linkage>()
            .map(Algorithm::Hierarchical)
            .map_err(|_| Error::invalid(format!("unknown clustering algorithm '{s}'")))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.to_string()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::KMeans => f.write_str("kmeans"),
            Algorithm::Hierarchical(l) => l.fmt(f),
        }
    }
}
