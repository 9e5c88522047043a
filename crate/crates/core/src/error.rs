use thiserror::Error;

/// Errors produced by the embedding, clustering and diagnostics pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("InvalidInput: {0}")]
    InvalidInput(String),

    #[error("NumericalFailure: {0}")]
    NumericalFailure(String),

    #[error("RankTooLarge: requested rank {requested} but only {available} usable positive eigenvalues")]
    RankTooLarge { requested: usize, available: usize },

    #[error("NotEnoughSignal: no eigenvalue exceeds the floor {floor}")]
    NotEnoughSignal { floor: f64 },

    #[error("DebiasUnderflow: eigenvalue {eigenvalue} at index {index} does not exceed tr(Sigma) = {trace}")]
    DebiasUnderflow { index: usize, eigenvalue: f64, trace: f64 },

    #[error("SingleCluster: between-cluster distance needs at least two nonempty clusters")]
    SingleCluster,

    #[error("InsufficientSamples: label {label} has {count} point(s), at least 2 required")]
    InsufficientSamples { label: usize, count: usize },

    #[error("DegenerateGap: eigengap {gap} at rank {rank} is below tolerance")]
    DegenerateGap { rank: usize, gap: f64 },

    #[error("InsufficientCrossings: {usable} column(s) cross the threshold, need at least 2")]
    InsufficientCrossings { usable: usize },
}

impl Error {
    /// Short variant name, as printed by the CLI on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::RankTooLarge { .. } => "RankTooLarge",
            Error::NotEnoughSignal { .. } => "NotEnoughSignal",
            Error::DebiasUnderflow { .. } => "DebiasUnderflow",
            Error::SingleCluster => "SingleCluster",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::DegenerateGap { .. } => "DegenerateGap",
            Error::InsufficientCrossings { .. } => "InsufficientCrossings",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
