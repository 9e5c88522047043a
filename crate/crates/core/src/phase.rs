//! Monte Carlo recovery grids over (noise, size or dimension) and the
//! threshold boundary fit.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{agreement, pgr_check, Algorithm};
use crate::cmds::{select_rank_eigenratio, CmdsSpectrum, EIGENRATIO_FLOOR};
use crate::datagen::{balanced_sizes, sample_with, ClusterModel, CovarianceSpec, Preset, RealizedCovariance};
use crate::diagnostics::{ideal_rank, model_snr};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Share of failed replicates above which a cell is unreliable.
pub const UNRELIABLE_FAILURE_SHARE: f64 = 0.10;

/// Which model dimension the grid columns vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Columns vary `N` at fixed `d`.
    NSweep,
    /// Columns vary `d` at fixed `N`.
    DSweep,
}

impl Axis {
    /// Horizontal coordinate of the boundary fit.
    pub fn transform(self, value: f64) -> f64 {
        match self {
            Axis::NSweep => value.ln().ln(),
            Axis::DSweep => value.ln(),
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Axis::NSweep => "(ln ln N, ln SNR)",
            Axis::DSweep => "(ln d, ln SNR)",
        }
    }
}

/// How each cell's model is built. Means are padded with zero columns up to
/// the cell's `d`, sizes are balanced over the cell's `N`, and the
/// covariance scale is the row's `σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelTemplate {
    Preset(PresetTemplate),
    Explicit(ExplicitTemplate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetTemplate {
    pub preset: Preset,
    #[serde(default)]
    pub knn_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTemplate {
    /// `k` rows of mean coordinates.
    pub means: Vec<Vec<f64>>,
    /// Shape of the noise; its `sigma` is replaced per grid row.
    pub covariance: CovarianceSpec,
}

impl ModelTemplate {
    pub fn preset(preset: Preset) -> Self {
        ModelTemplate::Preset(PresetTemplate { preset, knn_seed: 0 })
    }

    pub fn k(&self) -> usize {
        match self {
            ModelTemplate::Preset(p) => p.preset.k(),
            ModelTemplate::Explicit(e) => e.means.len(),
        }
    }

    pub fn build(&self, n: usize, d: usize, sigma: f64) -> Result<ClusterModel> {
        match self {
            ModelTemplate::Preset(p) => p.preset.model_with_seed(n, d, sigma, p.knn_seed),
            ModelTemplate::Explicit(e) => {
                let k = e.means.len();
                let width = e.means.first().map_or(0, Vec::len);
                if k == 0 || width == 0 || e.means.iter().any(|r| r.len() != width) {
                    return Err(Error::invalid("explicit means must be a non-empty rectangular table"));
                }
                if d < width {
                    return Err(Error::invalid(format!("explicit means need d >= {width}, got {d}")));
                }
                let means = DMatrix::from_fn(k, d, |i, j| if j < width { e.means[i][j] } else { 0.0 });
                ClusterModel::new(means, balanced_sizes(n, k)?, e.covariance.with_sigma(sigma))
            }
        }
    }
}

/// Embedding rank used in every replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RankRepr", into = "RankRepr")]
pub enum RankChoice {
    Fixed(usize),
    /// Eigenratio selection on each replicate's spectrum.
    AutoEigenratio,
    /// Rank of the cell's ideal Gram matrix.
    ModelRank,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RankRepr {
    Fixed(usize),
    Named(String),
}

impl TryFrom<RankRepr> for RankChoice {
    type Error = String;

    fn try_from(r: RankRepr) -> std::result::Result<Self, String> {
        match r {
            RankRepr::Fixed(0) => Err("embedding rank must be at least 1".into()),
            RankRepr::Fixed(n) => Ok(RankChoice::Fixed(n)),
            RankRepr::Named(s) => s.parse().map_err(|e: Error| e.to_string()),
        }
    }
}

impl From<RankChoice> for RankRepr {
    fn from(r: RankChoice) -> Self {
        match r {
            RankChoice::Fixed(n) => RankRepr::Fixed(n),
            RankChoice::AutoEigenratio => RankRepr::Named("auto-eigenratio".into()),
            RankChoice::ModelRank => RankRepr::Named("model-rank".into()),
        }
    }
}

impl std::str::FromStr for RankChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto-eigenratio" | "auto" => Ok(RankChoice::AutoEigenratio),
            "model-rank" => Ok(RankChoice::ModelRank),
            other => match other.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(RankChoice::Fixed(n)),
                _ => Err(Error::invalid(format!("invalid embedding rank '{other}'"))),
            },
        }
    }
}

/// What counts as a recovered replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryCriterion {
    /// Agreement with the planted labels is exactly 1.
    #[default]
    Agreement,
    /// The embedding is a perfect geometric representation of the truth.
    Pgr,
}

fn default_rank() -> RankChoice {
    RankChoice::ModelRank
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGridConfig {
    pub model: ModelTemplate,
    pub axis: Axis,
    /// `d` for an N sweep, `N` for a d sweep.
    pub fixed: usize,
    pub axis_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
    pub replicates: usize,
    #[serde(default)]
    pub clustering: Algorithm,
    #[serde(default = "default_rank")]
    pub embedding_rank: RankChoice,
    #[serde(default)]
    pub debias: bool,
    #[serde(default)]
    pub criterion: RecoveryCriterion,
    #[serde(default)]
    pub base_seed: u64,
}

impl PhaseGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.axis_values.is_empty() || self.sigma_values.is_empty() {
            return Err(Error::invalid("axis_values and sigma_values must be non-empty"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.fixed == 0 || self.axis_values[0] == 0 {
            return Err(Error::invalid("sizes and dimensions must be positive"));
        }
        if self.axis_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("axis_values must be strictly increasing"));
        }
        if self.sigma_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("sigma_values must be finite and >= 0"));
        }
        if self.sigma_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sigma_values must be strictly increasing"));
        }
        Ok(())
    }

    /// `(N, d)` of grid column `j`.
    pub fn shape(&self, j: usize) -> (usize, usize) {
        match self.axis {
            Axis::NSweep => (self.axis_values[j], self.fixed),
            Axis::DSweep => (self.fixed, self.axis_values[j]),
        }
    }

    pub fn cell_model(&self, i: usize, j: usize) -> Result<ClusterModel> {
        let (n, d) = self.shape(j);
        self.model.build(n, d, self.sigma_values[i])
    }

    /// Model SNR of every cell, `[σ row][axis column]`.
    pub fn snr_grid(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        (0..self.sigma_values.len())
            .map(|i| (0..self.axis_values.len()).map(|j| model_snr(&self.cell_model(i, j)?)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGridResult {
    pub config: PhaseGridConfig,
    /// Recovery fraction per cell, `[σ row][axis column]`.
    pub fractions: Vec<Vec<f64>>,
    pub successes: Vec<Vec<usize>>,
    /// Replicates that raised an error; they count as non-recovery.
    pub failures: Vec<Vec<usize>>,
    pub snr_values: Vec<Vec<f64>>,
    /// Some cell had more than 10% failed replicates.
    pub unreliable: bool,
    pub wall_time_secs: f64,
}

struct Cell {
    model: ClusterModel,
    cov: RealizedCovariance,
    rank: usize,
}

fn run_replicate(config: &PhaseGridConfig, cell: &Cell, seed: u64) -> Result<bool> {
    let sample = sample_with(&cell.model, &cell.cov, seed)?;
    let spectrum = CmdsSpectrum::from_coordinates(&sample.x)?;
    let r = match config.embedding_rank {
        RankChoice::AutoEigenratio => select_rank_eigenratio(spectrum.eigenvalues(), EIGENRATIO_FLOOR)?,
        _ => cell.rank,
    };
    let mut embedding = spectrum.embed(r)?;
    if config.debias {
        embedding = embedding.debias(cell.cov.trace())?;
    }
    match config.criterion {
        RecoveryCriterion::Agreement => {
            let k = cell.model.k();
            let labels = config.clustering.cluster(&embedding.coordinates, k, derive_seed(seed, "cluster", &[]))?;
            Ok(agreement(&labels, &sample.labels)? == 1.0)
        }
        RecoveryCriterion::Pgr => Ok(pgr_check(&embedding.coordinates, &sample.labels)?.is_pgr),
    }
}

/// Runs every replicate of every cell in parallel. Each replicate's seed is
/// derived from `(base_seed, σ row, axis column, replicate)`, so the result
/// does not depend on scheduling.
pub fn run_phase(config: &PhaseGridConfig) -> Result<PhaseGridResult> {
    config.validate()?;
    let start = Instant::now();
    let (rows, cols, reps) = (config.sigma_values.len(), config.axis_values.len(), config.replicates);
    let cells: Vec<Cell> = (0..rows * cols)
        .into_par_iter()
        .map(|c| {
            let model = config.cell_model(c / cols, c % cols)?;
            let cov = model.covariance.realize(model.d())?;
            let rank = match config.embedding_rank {
                RankChoice::Fixed(r) => r,
                _ => ideal_rank(&model),
            };
            Ok(Cell { model, cov, rank })
        })
        .collect::<Result<_>>()?;
    let snr_values = (0..rows)
        .map(|i| (0..cols).map(|j| model_snr(&cells[i * cols + j].model)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Result<bool>> = (0..rows * cols * reps)
        .into_par_iter()
        .map(|t| {
            let (c, rep) = (t / reps, t % reps);
            let seed = derive_seed(config.base_seed, "replicate", &[(c / cols) as u64, (c % cols) as u64, rep as u64]);
            run_replicate(config, &cells[c], seed)
        })
        .collect();

    let mut successes = vec![vec![0usize; cols]; rows];
    let mut failures = vec![vec![0usize; cols]; rows];
    for (t, outcome) in outcomes.iter().enumerate() {
        let c = t / reps;
        match outcome {
            Ok(true) => successes[c / cols][c % cols] += 1,
            Ok(false) => {}
            Err(_) => failures[c / cols][c % cols] += 1,
        }
    }
    let fractions = successes
        .iter()
        .map(|row| row.iter().map(|&s| s as f64 / reps as f64).collect())
        .collect();
    let unreliable = failures.iter().flatten().any(|&f| f as f64 > UNRELIABLE_FAILURE_SHARE * reps as f64);
    Ok(PhaseGridResult {
        config: config.clone(),
        fractions,
        successes,
        failures,
        snr_values,
        unreliable,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Rebuilds a result from stored fractions, recomputing the cell SNRs from
/// the configuration.
pub fn replay(config: &PhaseGridConfig, fractions: Vec<Vec<f64>>) -> Result<PhaseGridResult> {
    let snr_values = config.snr_grid()?;
    let (rows, cols) = (config.sigma_values.len(), config.axis_values.len());
    if fractions.len() != rows || fractions.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid(format!("fractions must be {rows}x{cols} to match the configuration")));
    }
    if fractions.iter().flatten().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::invalid("fractions must lie in [0, 1]"));
    }
    let reps = config.replicates;
    let successes = fractions
        .iter()
        .map(|r| r.iter().map(|f| (f * reps as f64).round() as usize).collect())
        .collect();
    Ok(PhaseGridResult {
        config: config.clone(),
        fractions,
        successes,
        failures: vec![vec![0; cols]; rows],
        snr_values,
        unreliable: false,
        wall_time_secs: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingPoint {
    pub column: usize,
    pub x: f64,
    pub log_snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub slope: f64,
    pub intercept: f64,
    pub transform: String,
    pub threshold: f64,
    pub crossing_points: Vec<CrossingPoint>,
    /// Columns whose fractions never cross the threshold.
    pub excluded_columns: Vec<usize>,
    pub r_squared: f64,
}

/// Pool-adjacent-violators fit that is nonincreasing along the slice.
pub fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    // Blocks of (mean, weight).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.truncate(blocks.len() - 2);
            blocks.push(((m1 * w1 as f64 + m2 * w2 as f64) / (w1 + w2) as f64, w1 + w2));
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

/// Log-SNR where one column's smoothed fractions fall through `threshold`.
/// Rows run from low to high noise, i.e. from high to low `log_snr`.
fn column_crossing(fractions: &[f64], log_snr: &[f64], threshold: f64) -> Option<f64> {
    let iso = isotonic_nonincreasing(fractions);
    let t = iso.iter().position(|&f| f < threshold)?;
    if t == 0 {
        return None;
    }
    let (f0, f1) = (iso[t - 1], iso[t]);
    let (l0, l1) = (log_snr[t - 1], log_snr[t]);
    if !(l0.is_finite() && l1.is_finite()) {
        return None;
    }
    Some(l0 + (f0 - threshold) / (f0 - f1) * (l1 - l0))
}

/// Boundary fit on a raw grid: `fractions[i][j]` and `log_snr[i][j]` for
/// noise row `i` and column `j`, with horizontal coordinate `x[j]`.
pub fn fit_boundary_grid(
    fractions: &[Vec<f64>],
    log_snr: &[Vec<f64>],
    x: &[f64],
    threshold: f64,
    transform: &str,
) -> Result<BoundaryFit> {
    let rows = fractions.len();
    if log_snr.len() != rows
        || fractions.iter().chain(log_snr).any(|r| r.len() != x.len())
    {
        return Err(Error::invalid("fractions, SNR grid and axis values disagree in shape"));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must be in (0, 1), got {threshold}")));
    }
    let mut crossing_points = Vec::new();
    let mut excluded_columns = Vec::new();
    for (j, &xj) in x.iter().enumerate() {
        let f: Vec<f64> = fractions.iter().map(|r| r[j]).collect();
        let l: Vec<f64> = log_snr.iter().map(|r| r[j]).collect();
        match column_crossing(&f, &l, threshold) {
            Some(ls) if xj.is_finite() => crossing_points.push(CrossingPoint { column: j, x: xj, log_snr: ls }),
            _ => excluded_columns.push(j),
        }
    }
    let m = crossing_points.len() as f64;
    let mean_x = crossing_points.iter().map(|p| p.x).sum::<f64>() / m;
    let mean_y = crossing_points.iter().map(|p| p.log_snr).sum::<f64>() / m;
    let sxx: f64 = crossing_points.iter().map(|p| (p.x - mean_x).powi(2)).sum();
    if crossing_points.len() < 2 || sxx <= 0.0 {
        return Err(Error::InsufficientCrossings { usable: crossing_points.len() });
    }
    let sxy: f64 = crossing_points.iter().map(|p| (p.x - mean_x) * (p.log_snr - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = crossing_points.iter().map(|p| (p.log_snr - mean_y).powi(2)).sum();
    let ss_res: f64 = crossing_points
        .iter()
        .map(|p| (p.log_snr - slope * p.x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(BoundaryFit {
        slope,
        intercept,
        transform: transform.to_string(),
        threshold,
        crossing_points,
        excluded_columns,
        r_squared,
    })
}

/// Fits `ln SNR = slope · x + intercept` through the per-column threshold
/// crossings, with `x = ln ln N` or `ln d`.
pub fn fit_boundary(result: &PhaseGridResult, threshold: f64) -> Result<BoundaryFit> {
    let axis = result.config.axis;
    let x: Vec<f64> = result.config.axis_values.iter().map(|&v| axis.transform(v as f64)).collect();
    let log_snr: Vec<Vec<f64>> = result.snr_values.iter().map(|r| r.iter().map(|s| s.ln()).collect()).collect();
    fit_boundary_grid(&result.fractions, &log_snr, &x, threshold, axis.describe())
}
