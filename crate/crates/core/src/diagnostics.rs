//! Model statistics, condition checks, SNR estimation and empirical audits of
//! the perturbation bounds.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::clustering::LabelVector;
use crate::cmds::{center_columns, POSITIVITY_FLOOR};
use crate::datagen::{sample_with, ClusterModel, SampleSet};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::spectral::{
    inf_norm, max_norm, procrustes_rotation, sym_eig_desc, symmetric_spectral_norm, SymmetricMatrix,
};

/// Gap tolerance relative to the top eigenvalue.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStats {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Rank the stats were computed for.
    pub r: usize,
    pub n_min: usize,
    /// Smallest distance between two distinct cluster means.
    pub mu_diff: f64,
    /// Largest norm of a recentered mean.
    pub mu_max: f64,
    /// `‖Σ‖₂^{1/2}`.
    pub sigma_max: f64,
    pub trace_sigma: f64,
    pub snr: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub xi: f64,
    pub rho: f64,
    /// Rank of the centered ideal Gram matrix.
    pub s: usize,
    /// Its nonzero-capable eigenvalues, descending (length `k`).
    pub lambdas: Vec<f64>,
}

/// Eigenvalues of the centered `MMᵀ` via the `k × k` matrix
/// `W^{1/2} C Cᵀ W^{1/2}` (W = cluster sizes, C = recentered means); the
/// remaining `N − k` eigenvalues are zero.
pub fn ideal_eigenvalues(model: &ClusterModel) -> Vec<f64> {
    let c = model.centered_means();
    let w: Vec<f64> = model.sizes.iter().map(|&n| (n as f64).sqrt()).collect();
    let mut g = &c * c.transpose();
    for a in 0..g.nrows() {
        for b in 0..g.ncols() {
            g[(a, b)] *= w[a] * w[b];
        }
    }
    let dec = sym_eig_desc(&SymmetricMatrix::new(g).expect("finite means")).expect("k x k eigenproblem");
    dec.eigenvalues.into_iter().map(|l| l.max(0.0)).collect()
}

/// Rank `s` of the centered ideal Gram matrix.
pub fn ideal_rank(model: &ClusterModel) -> usize {
    positive_rank(&ideal_eigenvalues(model))
}

fn positive_rank(lambdas: &[f64]) -> usize {
    let top = lambdas.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    lambdas.iter().filter(|&&l| l > POSITIVITY_FLOOR * top).count()
}

fn min_mean_distance(means: &DMatrix<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..means.nrows() {
        for b in a + 1..means.nrows() {
            best = best.min((means.row(a) - means.row(b)).norm());
        }
    }
    best
}

/// The `N × N` centered ideal Gram matrix `(JM)(JM)ᵀ`.
pub fn ideal_gram(model: &ClusterModel) -> SymmetricMatrix {
    let rows = center_columns(&model.mean_rows());
    SymmetricMatrix::new(&rows * rows.transpose()).expect("finite means")
}

/// `μ_diff² / ‖Σ‖₂`; infinite for a noiseless model.
pub fn model_snr(model: &ClusterModel) -> Result<f64> {
    let cov = model.covariance.realize(model.d())?;
    Ok(min_mean_distance(&model.means).powi(2) / cov.spectral_norm())
}

pub fn model_stats(model: &ClusterModel, r: usize) -> Result<ModelStats> {
    model.validate()?;
    if r == 0 {
        return Err(Error::invalid("rank r must be at least 1"));
    }
    let lambdas = ideal_eigenvalues(model);
    let s = positive_rank(&lambdas);
    if r > s {
        return Err(Error::RankTooLarge { requested: r, available: s });
    }
    let cov = model.covariance.realize(model.d())?;
    let sigma_sq = cov.spectral_norm();
    let mu_diff = min_mean_distance(&model.means);
    let mu_max = model.centered_means().row_iter().map(|r| r.norm()).fold(0.0, f64::max);
    let (n, d) = (model.n(), model.d());
    Ok(ModelStats {
        n,
        d,
        k: model.k(),
        r,
        n_min: model.n_min(),
        mu_diff,
        mu_max,
        sigma_max: sigma_sq.sqrt(),
        trace_sigma: cov.trace(),
        snr: mu_diff * mu_diff / sigma_sq,
        gamma: d as f64 / n as f64,
        zeta: n as f64 / model.n_min() as f64,
        xi: mu_max / mu_diff,
        rho: lambdas[0] / lambdas[r - 1],
        s,
        lambdas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrEstimate {
    pub snr_hat: f64,
    /// Top eigenvalue of `HᵀH/N` for the residual `H = X − M̂`.
    pub sigma_hat_sq: f64,
    pub mu_diff: f64,
}

/// SNR from labelled data, using per-label empirical means.
pub fn estimate_snr(x: &DMatrix<f64>, labels: &LabelVector) -> Result<SnrEstimate> {
    let (n, d) = x.shape();
    if labels.len() != n {
        return Err(Error::invalid(format!("{n} rows but {} labels", labels.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contain non-finite values"));
    }
    let counts = labels.counts();
    if let Some((j, &c)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::InsufficientSamples { label: j + 1, count: c });
    }
    let k = labels.k();
    let mut means = DMatrix::<f64>::zeros(k, d);
    for (i, &l) in labels.as_slice().iter().enumerate() {
        let mut row = means.row_mut(l - 1);
        row += x.row(i);
    }
    for (j, &c) in counts.iter().enumerate() {
        let mut row = means.row_mut(j);
        row /= c as f64;
    }
    let mut h = x.clone();
    for (i, &l) in labels.as_slice().iter().enumerate() {
        let mut row = h.row_mut(i);
        row -= means.row(l - 1);
    }
    let gram = if d > n { &h * h.transpose() } else { h.transpose() * &h };
    let top = sym_eig_desc(&SymmetricMatrix::new(gram)?)?.eigenvalues[0].max(0.0);
    let sigma_hat_sq = top / n as f64;
    let mu_diff = if k > 1 { min_mean_distance(&means) } else { f64::NAN };
    Ok(SnrEstimate { snr_hat: mu_diff * mu_diff / sigma_hat_sq, sigma_hat_sq, mu_diff })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionOne {
    pub holds: bool,
    pub min_value: f64,
    pub max_value: f64,
    /// Names of the quantities outside `(tau1, tau2)`.
    pub violating: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTwo {
    pub holds: bool,
    /// `r = s`, so there is no trailing eigenvalue to bound.
    pub trivially: bool,
    /// `λ_{r+1}`.
    pub lhs: f64,
    /// `λ_r / (2ζ(s − r))`.
    pub rhs_eigen: f64,
    /// `μ_diff²·n_min / (144(s − r))`.
    pub rhs_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub r: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub condition1: ConditionOne,
    pub condition2: ConditionTwo,
}

/// Evaluates the bounded-ratio condition on `(k, ρ, ζ, ξ)` and the
/// trailing-eigenvalue condition for embedding rank `r`.
pub fn check_conditions(stats: &ModelStats, r: usize, tau1: f64, tau2: f64) -> ConditionReport {
    let lam = |i: usize| stats.lambdas.get(i).copied().unwrap_or(0.0);
    let rho = if r >= 1 && r <= stats.s { lam(0) / lam(r - 1) } else { f64::INFINITY };
    let quantities = [("k", stats.k as f64), ("rho", rho), ("zeta", stats.zeta), ("xi", stats.xi)];
    let violating: Vec<String> = quantities
        .iter()
        .filter(|(_, v)| !(tau1 < *v && *v < tau2))
        .map(|(name, _)| name.to_string())
        .collect();
    let condition1 = ConditionOne {
        holds: violating.is_empty(),
        min_value: quantities.iter().map(|q| q.1).fold(f64::INFINITY, f64::min),
        max_value: quantities.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max),
        violating,
    };
    let condition2 = if r == 0 || r > stats.s {
        ConditionTwo { holds: false, trivially: false, lhs: lam(r), rhs_eigen: 0.0, rhs_separation: 0.0 }
    } else if r == stats.s {
        ConditionTwo { holds: true, trivially: true, lhs: lam(r), rhs_eigen: 0.0, rhs_separation: 0.0 }
    } else {
        let gap = (stats.s - r) as f64;
        let rhs_eigen = lam(r - 1) / (2.0 * stats.zeta * gap);
        let rhs_separation = stats.mu_diff.powi(2) * stats.n_min as f64 / (144.0 * gap);
        ConditionTwo {
            holds: lam(r) <= rhs_eigen.max(rhs_separation),
            trivially: false,
            lhs: lam(r),
            rhs_eigen,
            rhs_separation,
        }
    };
    ConditionReport { r, tau1, tau2, condition1, condition2 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorMatrixNorms {
    pub spectral: f64,
    pub inf: f64,
    /// `‖P − tr(Σ)J‖₂`.
    pub centered_spectral: f64,
}

fn check_shape(x: &DMatrix<f64>, model: &ClusterModel) -> Result<()> {
    if x.shape() != (model.n(), model.d()) {
        return Err(Error::invalid(format!(
            "data are {}x{} but the model describes {}x{}",
            x.nrows(),
            x.ncols(),
            model.n(),
            model.d()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("data contain non-finite values"));
    }
    Ok(())
}

/// `P = (JX)(JX)ᵀ − (JM)(JM)ᵀ`.
fn error_matrix(x: &DMatrix<f64>, model: &ClusterModel) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let xc = center_columns(x);
    let noisy = &xc * xc.transpose();
    let ideal = ideal_gram(model).into_inner();
    (&noisy - &ideal, noisy, ideal)
}

fn norms_of(p: &DMatrix<f64>, trace_sigma: f64) -> Result<ErrorMatrixNorms> {
    let n = p.nrows();
    let centered = DMatrix::from_fn(n, n, |i, j| {
        let jij = if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64;
        p[(i, j)] - trace_sigma * jij
    });
    Ok(ErrorMatrixNorms {
        spectral: symmetric_spectral_norm(&SymmetricMatrix::new(p.clone())?)?,
        inf: inf_norm(p)?,
        centered_spectral: symmetric_spectral_norm(&SymmetricMatrix::new(centered)?)?,
    })
}

pub fn error_matrix_norms(x: &DMatrix<f64>, model: &ClusterModel) -> Result<ErrorMatrixNorms> {
    check_shape(x, model)?;
    let trace = model.covariance.realize(model.d())?.trace();
    norms_of(&error_matrix(x, model).0, trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub r: usize,
    pub spec_norm_p: f64,
    pub inf_norm_p: f64,
    pub centered_spec_norm: f64,
    /// `‖Ṽ_r R − V_r‖_max` for the better of the Procrustes and identity
    /// alignments.
    pub eigvec_err_max: f64,
    /// `‖Ṽ_r Λ̃_r^{1/2} R − V_r Λ_r^{1/2}‖_max`, aligned the same way.
    pub embed_err_max: f64,
    /// Bound right-hand sides with every constant set to 1.
    pub bound_rhs_thm1: f64,
    pub bound_rhs_thm2: f64,
    /// Measured over bound; absent when the bound is zero.
    pub eigvec_ratio: Option<f64>,
    pub embed_ratio: Option<f64>,
    /// `max_i |λ̃_i − λ_i|` over the full spectra.
    pub weyl_max_deviation: f64,
}

/// `σ(log N)^{1/2}/(μ_max N^{1/2}) + (σ²/μ_max²)(γ^{1/2} log N + γ/N^{1/2})`.
pub fn eigenvector_bound(stats: &ModelStats) -> f64 {
    let (n, s, m) = (stats.n as f64, stats.sigma_max, stats.mu_max);
    let g = stats.gamma;
    s * n.ln().sqrt() / (m * n.sqrt()) + (s * s / (m * m)) * (g.sqrt() * n.ln() + g / n.sqrt())
}

/// `[σ μ_max (1 + √γ)]^{1/2} + σ(√log N + √γ) + (σ²/μ_max)(√d log N + γ)`.
pub fn embedding_bound(stats: &ModelStats) -> f64 {
    let (n, s, m) = (stats.n as f64, stats.sigma_max, stats.mu_max);
    let (g, d) = (stats.gamma, stats.d as f64);
    (s * m * (1.0 + g.sqrt())).sqrt() + s * (n.ln().sqrt() + g.sqrt()) + (s * s / m) * (d.sqrt() * n.ln() + g)
}

fn aligned_error(noisy: &DMatrix<f64>, ideal: &DMatrix<f64>) -> Result<f64> {
    let rot = procrustes_rotation(noisy, ideal)?.rotation;
    let with_rot = max_norm(&(noisy * rot - ideal))?;
    let plain = max_norm(&(noisy - ideal))?;
    Ok(with_rot.min(plain))
}

fn scale_columns(v: &DMatrix<f64>, eig: &[f64]) -> DMatrix<f64> {
    let mut out = v.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= eig[j].max(0.0).sqrt();
    }
    out
}

/// Compares the noisy and ideal rank-`r` eigenpairs of one sample.
pub fn perturbation_audit(sample: &SampleSet, model: &ClusterModel, r: usize) -> Result<PerturbationReport> {
    check_shape(&sample.x, model)?;
    let stats = model_stats(model, r)?;
    let (p, noisy, ideal) = error_matrix(&sample.x, model);
    let ideal_dec = sym_eig_desc(&SymmetricMatrix::new(ideal)?)?;
    let lam = &ideal_dec.eigenvalues;
    let gap = lam[r - 1] - lam.get(r).copied().unwrap_or(0.0);
    if gap <= GAP_TOL * lam[0] {
        return Err(Error::DegenerateGap { rank: r, gap });
    }
    let noisy_dec = sym_eig_desc(&SymmetricMatrix::new(noisy)?)?;
    let v = ideal_dec.leading_vectors(r);
    let vt = noisy_dec.leading_vectors(r);
    let eigvec_err_max = aligned_error(&vt, &v)?;
    let y = scale_columns(&v, &lam[..r]);
    let yt = scale_columns(&vt, &noisy_dec.eigenvalues[..r]);
    let embed_err_max = aligned_error(&yt, &y)?;
    let norms = norms_of(&p, stats.trace_sigma)?;
    let weyl_max_deviation = noisy_dec
        .eigenvalues
        .iter()
        .zip(lam)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let bound_rhs_thm1 = eigenvector_bound(&stats);
    let bound_rhs_thm2 = embedding_bound(&stats);
    let ratio = |m: f64, b: f64| (b > 0.0).then(|| m / b);
    Ok(PerturbationReport {
        r,
        spec_norm_p: norms.spectral,
        inf_norm_p: norms.inf,
        centered_spec_norm: norms.centered_spectral,
        eigvec_err_max,
        embed_err_max,
        bound_rhs_thm1,
        bound_rhs_thm2,
        eigvec_ratio: ratio(eigvec_err_max, bound_rhs_thm1),
        embed_ratio: ratio(embed_err_max, bound_rhs_thm2),
        weyl_max_deviation,
    })
}

/// Audits `reps` independent samples in parallel; replicate `i` uses the
/// seed derived from `(base_seed, "audit", i)`.
pub fn audit_replicates(
    model: &ClusterModel,
    r: usize,
    reps: usize,
    base_seed: u64,
) -> Result<Vec<PerturbationReport>> {
    let cov = model.covariance.realize(model.d())?;
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let s = sample_with(model, &cov, derive_seed(base_seed, "audit", &[i as u64]))?;
            perturbation_audit(&s, model, r)
        })
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
