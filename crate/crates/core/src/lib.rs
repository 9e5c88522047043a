//! Classical multidimensional scaling with exact cluster recovery tools:
//! embedding, debiasing, clustering, recovery certificates, SNR
//! diagnostics and Monte Carlo phase grids.

pub mod clustering;
pub mod cmds;
pub mod datagen;
pub mod diagnostics;
pub mod error;
pub mod phase;
pub mod rng;
pub mod spectral;

pub use clustering::{agreement, Algorithm, LabelVector, Linkage};
pub use cmds::{DissimilarityMatrix, Embedding};
pub use datagen::{ClusterModel, CovarianceSpec, Preset, SampleSet};
pub use error::{Error, Result};
pub use phase::{BoundaryFit, PhaseGridConfig, PhaseGridResult};
pub use spectral::{SpectralDecomposition, SymmetricMatrix};
