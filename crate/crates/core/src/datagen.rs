//! Synthetic cluster models `X = M + H` and the preset simulation settings.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::LabelVector;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::spectral::{sym_eig_desc, SymmetricMatrix};

/// Correlation decay of the Toeplitz covariance.
pub const TOEPLITZ_DECAY: f64 = 0.7;

/// Shape of the noise covariance. Scale lives in [`CovarianceSpec::sigma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Isotropic,
    Toeplitz,
    Knn,
}

/// Neighbour-graph parameters: `neighbors` links per anchor, anchors drawn on
/// `[0, extent]²` from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnParams {
    pub neighbors: usize,
    pub extent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceSpec {
    pub kind: CovarianceKind,
    /// Noise scale; every realized diagonal entry equals `sigma²`.
    /// Zero means a noiseless model.
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knn: Option<KnnParams>,
}

impl CovarianceSpec {
    pub fn isotropic(sigma: f64) -> Self {
        CovarianceSpec { kind: CovarianceKind::Isotropic, sigma, knn: None }
    }

    pub fn toeplitz(sigma: f64) -> Self {
        CovarianceSpec { kind: CovarianceKind::Toeplitz, sigma, knn: None }
    }

    pub fn knn(sigma: f64, neighbors: usize, extent: f64, seed: u64) -> Self {
        CovarianceSpec {
            kind: CovarianceKind::Knn,
            sigma,
            knn: Some(KnnParams { neighbors, extent, seed }),
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        CovarianceSpec { sigma, ..self.clone() }
    }

    fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        match (self.kind, self.knn) {
            (CovarianceKind::Knn, None) => {
                return Err(Error::invalid("knn covariance needs knn parameters"));
            }
            (CovarianceKind::Knn, Some(_)) => {}
            (_, Some(_)) => {
                return Err(Error::invalid("knn parameters given for a non-knn covariance"));
            }
            (_, None) => {}
        }
        if let Some(KnnParams { neighbors, extent, .. }) = self.knn {
            if neighbors == 0 {
                return Err(Error::invalid("knn covariance needs at least one neighbor"));
            }
            if !(extent.is_finite() && extent > 0.0) {
                return Err(Error::invalid(format!("knn extent must be positive, got {extent}")));
            }
        }
        Ok(())
    }

    /// Materializes the covariance in dimension `d`.
    pub fn realize(&self, d: usize) -> Result<RealizedCovariance> {
        self.validate()?;
        if d == 0 {
            return Err(Error::invalid("dimension d must be at least 1"));
        }
        if self.sigma == 0.0 {
            return Ok(RealizedCovariance::Scaled { sigma: 0.0, d });
        }
        match self.kind {
            CovarianceKind::Isotropic => Ok(RealizedCovariance::Scaled { sigma: self.sigma, d }),
            CovarianceKind::Toeplitz => {
                RealizedCovariance::dense(make_toeplitz_cov(self.sigma, d)?, 0.0)
            }
            CovarianceKind::Knn => {
                let KnnParams { neighbors, extent, seed } = self.knn.expect("validated");
                let knn = make_knn_cov(self.sigma, d, neighbors, extent, seed)?;
                RealizedCovariance::dense(knn.repaired, knn.clipped_mass)
            }
        }
    }
}

/// A covariance ready for sampling.
///
/// Isotropic noise never builds the `d × d` matrix, which keeps very wide
/// phase grids cheap.
#[derive(Debug, Clone)]
pub enum RealizedCovariance {
    Scaled { sigma: f64, d: usize },
    Dense { matrix: DMatrix<f64>, root: DMatrix<f64>, top_eigenvalue: f64, clipped_mass: f64 },
}

impl RealizedCovariance {
    fn dense(matrix: DMatrix<f64>, clipped_mass: f64) -> Result<Self> {
        let dec = sym_eig_desc(&SymmetricMatrix::new(matrix.clone())?)?;
        let floor = -1e-10 * dec.eigenvalues[0].abs().max(f64::MIN_POSITIVE);
        if let Some(&bad) = dec.eigenvalues.iter().find(|&&l| l < floor) {
            return Err(Error::invalid(format!("covariance is not PSD (eigenvalue {bad:e})")));
        }
        let roots = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dec.eigenvalues.len(),
            dec.eigenvalues.iter().map(|l| l.max(0.0).sqrt()),
        ));
        let v = &dec.eigenvectors;
        let root = v * roots * v.transpose();
        Ok(RealizedCovariance::Dense {
            matrix,
            root,
            top_eigenvalue: dec.eigenvalues[0].max(0.0),
            clipped_mass,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            RealizedCovariance::Scaled { d, .. } => *d,
            RealizedCovariance::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            RealizedCovariance::Scaled { sigma, d } => sigma * sigma * *d as f64,
            RealizedCovariance::Dense { matrix, .. } => matrix.trace(),
        }
    }

    /// `‖Σ‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        match self {
            RealizedCovariance::Scaled { sigma, .. } => sigma * sigma,
            RealizedCovariance::Dense { top_eigenvalue, .. } => *top_eigenvalue,
        }
    }

    pub fn clipped_mass(&self) -> f64 {
        match self {
            RealizedCovariance::Scaled { .. } => 0.0,
            RealizedCovariance::Dense { clipped_mass, .. } => *clipped_mass,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            RealizedCovariance::Scaled { sigma, d } => DMatrix::identity(*d, *d) * (sigma * sigma),
            RealizedCovariance::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// Draws `n` independent `N(0, Σ)` rows.
    pub fn sample_noise(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let d = self.dim();
        match self {
            RealizedCovariance::Scaled { sigma, .. } if *sigma == 0.0 => DMatrix::zeros(n, d),
            _ => {
                let mut rng = rng_from_seed(seed);
                let z = DMatrix::from_row_iterator(
                    n,
                    d,
                    (0..n * d).map(|_| rng.sample::<f64, _>(StandardNormal)),
                );
                match self {
                    RealizedCovariance::Scaled { sigma, .. } => z * *sigma,
                    // Rows are z·S with S the symmetric square root.
                    RealizedCovariance::Dense { root, .. } => z * root,
                }
            }
        }
    }
}

/// Kac–Murdock–Szegő matrix `σ²·0.7^|i−j|`.
pub fn make_toeplitz_cov(sigma: f64, d: usize) -> Result<DMatrix<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension d must be at least 1"));
    }
    let s2 = sigma * sigma;
    Ok(DMatrix::from_fn(d, d, |i, j| s2 * TOEPLITZ_DECAY.powi(i.abs_diff(j) as i32)))
}

/// A nearest-neighbour covariance together with its PSD repair.
#[derive(Debug, Clone)]
pub struct KnnCovariance {
    pub points: Vec<[f64; 2]>,
    /// Matrix exactly as defined by the neighbour relation.
    pub raw: DMatrix<f64>,
    /// Negative eigenvalues clipped to zero.
    pub repaired: DMatrix<f64>,
    /// Sum of the absolute values of the clipped eigenvalues.
    pub clipped_mass: f64,
}

/// Samples `d` anchor points uniformly on `[0, extent]²` and links each to
/// its `neighbors` nearest anchors.
pub fn make_knn_cov(
    sigma: f64,
    d: usize,
    neighbors: usize,
    extent: f64,
    seed: u64,
) -> Result<KnnCovariance> {
    if !(extent.is_finite() && extent > 0.0) {
        return Err(Error::invalid(format!("knn extent must be positive, got {extent}")));
    }
    let mut rng = rng_from_seed(seed);
    let points: Vec<[f64; 2]> = (0..d)
        .map(|_| [rng.random::<f64>() * extent, rng.random::<f64>() * extent])
        .collect();
    knn_cov_from_points(sigma, &points, neighbors)
}

/// The neighbour covariance for fixed anchor points.
pub fn knn_cov_from_points(sigma: f64, points: &[[f64; 2]], neighbors: usize) -> Result<KnnCovariance> {
    let d = points.len();
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if neighbors == 0 || neighbors >= d {
        return Err(Error::invalid(format!(
            "knn covariance needs 1 <= K < d, got K = {neighbors}, d = {d}"
        )));
    }
    let dist = |i: usize, j: usize| {
        let (a, b) = (points[i], points[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    let s2 = sigma * sigma;
    let mut raw = DMatrix::from_diagonal_element(d, d, s2);
    let mut others: Vec<usize> = Vec::with_capacity(d - 1);
    for j in 0..d {
        others.clear();
        others.extend((0..d).filter(|&i| i != j));
        others.sort_by(|&a, &b| dist(a, j).total_cmp(&dist(b, j)).then(a.cmp(&b)));
        for &i in &others[..neighbors] {
            let v = s2 * dist(i, j);
            raw[(i, j)] = v;
            raw[(j, i)] = v;
        }
    }
    let dec = sym_eig_desc(&SymmetricMatrix::new(raw.clone())?)?;
    let clipped_mass: f64 = dec.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let repaired = if clipped_mass > 0.0 {
        let clipped: Vec<f64> = dec.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let v = &dec.eigenvectors;
        let m = v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(clipped)) * v.transpose();
        (&m + m.transpose()) * 0.5
    } else {
        raw.clone()
    };
    Ok(KnnCovariance { points: points.to_vec(), raw, repaired, clipped_mass })
}

/// Cluster means, sizes and noise covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterModel {
    /// `k × d`, row `j` is the mean of cluster `j + 1`.
    #[serde(with = "matrix_rows")]
    pub means: DMatrix<f64>,
    pub sizes: Vec<usize>,
    pub covariance: CovarianceSpec,
}

impl ClusterModel {
    pub fn new(means: DMatrix<f64>, sizes: Vec<usize>, covariance: CovarianceSpec) -> Result<Self> {
        let m = ClusterModel { means, sizes, covariance };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.nrows() == 0 || self.means.ncols() == 0 {
            return Err(Error::invalid("means must be a non-empty k x d matrix"));
        }
        if self.sizes.len() != self.means.nrows() {
            return Err(Error::invalid(format!(
                "{} cluster sizes given for {} means",
                self.sizes.len(),
                self.means.nrows()
            )));
        }
        if self.sizes.contains(&0) {
            return Err(Error::invalid("every cluster needs at least one point"));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("means contain non-finite values"));
        }
        self.covariance.validate()
    }

    pub fn k(&self) -> usize {
        self.means.nrows()
    }

    pub fn d(&self) -> usize {
        self.means.ncols()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn n_min(&self) -> usize {
        self.sizes.iter().copied().min().unwrap_or(0)
    }

    pub fn labels(&self) -> LabelVector {
        LabelVector::blocks(&self.sizes).expect("validated sizes")
    }

    /// `N × d` matrix whose row `i` is the mean of point `i`'s cluster.
    pub fn mean_rows(&self) -> DMatrix<f64> {
        let labels = self.labels();
        let d = self.d();
        DMatrix::from_fn(self.n(), d, |i, j| self.means[(labels.as_slice()[i] - 1, j)])
    }

    /// Means shifted so that the size-weighted mean is zero.
    pub fn centered_means(&self) -> DMatrix<f64> {
        let n = self.n() as f64;
        let mut center = nalgebra::RowDVector::zeros(self.d());
        for (j, &nj) in self.sizes.iter().enumerate() {
            center += self.means.row(j) * (nj as f64 / n);
        }
        let mut out = self.means.clone();
        for mut row in out.row_iter_mut() {
            row -= &center;
        }
        out
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        ClusterModel { covariance: self.covariance.with_sigma(sigma), ..self.clone() }
    }
}

/// One draw from a [`ClusterModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub x: DMatrix<f64>,
    pub labels: LabelVector,
    pub mean_rows: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

pub fn sample(model: &ClusterModel, seed: u64) -> Result<SampleSet> {
    model.validate()?;
    let cov = model.covariance.realize(model.d())?;
    sample_with(model, &cov, seed)
}

/// Sampling with an already realized covariance, for callers drawing many
/// replicates from one model.
pub fn sample_with(model: &ClusterModel, cov: &RealizedCovariance, seed: u64) -> Result<SampleSet> {
    if cov.dim() != model.d() {
        return Err(Error::invalid(format!(
            "covariance dimension {} does not match model dimension {}",
            cov.dim(),
            model.d()
        )));
    }
    let mean_rows = model.mean_rows();
    let noise = cov.sample_noise(model.n(), seed);
    let x = &mean_rows + &noise;
    Ok(SampleSet { x, labels: model.labels(), mean_rows, noise })
}

/// Sizes as equal as possible; the first `n mod k` clusters get one extra.
pub fn balanced_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || n < k {
        return Err(Error::invalid(format!("cannot split N = {n} points into k = {k} clusters")));
    }
    Ok((0..k).map(|j| n / k + usize::from(j < n % k)).collect())
}

/// The preset simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "1a")]
    S1a,
    #[serde(rename = "1b")]
    S1b,
    #[serde(rename = "1c")]
    S1c,
    #[serde(rename = "2a")]
    S2a,
    #[serde(rename = "2b")]
    S2b,
    #[serde(rename = "2c")]
    S2c,
    #[serde(rename = "2d")]
    S2d,
    #[serde(rename = "2e")]
    S2e,
    #[serde(rename = "2f")]
    S2f,
}

impl Preset {
    pub const ALL: [Preset; 9] = [
        Preset::S1a,
        Preset::S1b,
        Preset::S1c,
        Preset::S2a,
        Preset::S2b,
        Preset::S2c,
        Preset::S2d,
        Preset::S2e,
        Preset::S2f,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::S1a => "1a",
            Preset::S1b => "1b",
            Preset::S1c => "1c",
            Preset::S2a => "2a",
            Preset::S2b => "2b",
            Preset::S2c => "2c",
            Preset::S2d => "2d",
            Preset::S2e => "2e",
            Preset::S2f => "2f",
        }
    }

    pub fn k(self) -> usize {
        match self {
            Preset::S2a => 2,
            Preset::S2e => 3,
            Preset::S1a | Preset::S1b | Preset::S1c => 4,
            _ => 5,
        }
    }

    /// The non-zero block of the means; columns beyond it are zero.
    pub fn signal_means(self) -> DMatrix<f64> {
        let tiny = 1e-7;
        match self {
            Preset::S1a => DMatrix::from_row_slice(
                4,
                2,
                &[tiny, 0.0, -tiny, 0.0, 0.0, tiny, 0.0, -tiny],
            ),
            Preset::S1b | Preset::S1c => DMatrix::from_diagonal_element(4, 4, tiny),
            Preset::S2a => DMatrix::identity(2, 2),
            Preset::S2b | Preset::S2c | Preset::S2d => DMatrix::from_diagonal_element(5, 5, 0.5),
            Preset::S2e => DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.4, 0.6, 1.0, 1.0]),
            Preset::S2f => DMatrix::from_row_slice(
                5,
                4,
                &[
                    0.0, 0.0, 0.0, 0.0, //
                    0.49, 0.51, 0.0, 0.0, //
                    -0.49, -0.51, 0.0, 0.0, //
                    0.0, 0.0, 0.49, 0.51, //
                    0.0, 0.0, -0.49, -0.51,
                ],
            ),
        }
    }

    /// Covariance shape with the tabulated neighbour parameters.
    pub fn covariance(self, sigma: f64, knn_seed: u64) -> CovarianceSpec {
        match self {
            Preset::S1b | Preset::S2c => CovarianceSpec::toeplitz(sigma),
            Preset::S1c => CovarianceSpec::knn(sigma, 4, 1.0, knn_seed),
            Preset::S2d => CovarianceSpec::knn(sigma, 10, 0.5, knn_seed),
            _ => CovarianceSpec::isotropic(sigma),
        }
    }

    /// Tabulated embedding dimension.
    pub fn listed_rank(self) -> usize {
        match self {
            Preset::S2a => 1,
            Preset::S1a | Preset::S2e => 2,
            Preset::S1b | Preset::S1c => 3,
            _ => 4,
        }
    }

    /// Tabulated `(N, d)` used when the caller does not override them.
    pub fn default_shape(self) -> (usize, usize) {
        match self {
            Preset::S1a => (100, 2),
            Preset::S1b => (100, 10),
            Preset::S1c => (100, 20),
            Preset::S2a => (200, 100),
            Preset::S2e => (60, 100),
            _ => (100, 100),
        }
    }

    pub fn replicates(self) -> usize {
        match self {
            Preset::S1b | Preset::S1c => 50,
            _ => 20,
        }
    }

    pub fn model(self, n: usize, d: usize, sigma: f64) -> Result<ClusterModel> {
        self.model_with_seed(n, d, sigma, 0)
    }

    pub fn model_with_seed(self, n: usize, d: usize, sigma: f64, knn_seed: u64) -> Result<ClusterModel> {
        let signal = self.signal_means();
        if d < signal.ncols() {
            return Err(Error::invalid(format!(
                "preset {} needs d >= {}, got {d}",
                self.name(),
                signal.ncols()
            )));
        }
        let mut means = DMatrix::zeros(signal.nrows(), d);
        means.view_mut((0, 0), signal.shape()).copy_from(&signal);
        ClusterModel::new(means, balanced_sizes(n, self.k())?, self.covariance(sigma, knn_seed))
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown simulation preset '{s}'")))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds a preset model by name with the default neighbour-graph seed.
pub fn build_simulation_model(name: &str, n: usize, d: usize, sigma: f64) -> Result<ClusterModel> {
    name.parse::<Preset>()?.model(n, d, sigma)
}

/// Serializes a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have unequal lengths"));
        }
        Ok(DMatrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten()))
    }
}
