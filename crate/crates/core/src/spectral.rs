//! Dense symmetric-matrix primitives: eigendecomposition in descending order,
//! the matrix norms used by the perturbation audits, and orthogonal Procrustes
//! alignment.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 0; // 0 = no iteration cap in nalgebra

/// Coordinates smaller than this are skipped when fixing eigenvector signs.
const SIGN_TOL: f64 = 1e-12;

/// A square real matrix stored in exactly symmetric form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Symmetrizes `a` as `(A + Aᵀ)/2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::invalid(format!(
                "symmetric matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::invalid("symmetric matrix must be at least 1x1"));
        }
        ensure_finite(&a)?;
        let n = a.nrows();
        let mut s = a;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        Ok(SymmetricMatrix(s))
    }

    /// Wraps a matrix the caller has built symmetric entry by entry.
    pub(crate) fn from_exact(a: DMatrix<f64>) -> Self {
        debug_assert!(a.nrows() == a.ncols());
        SymmetricMatrix(a)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing and column `i`
/// of `eigenvectors` paired with `eigenvalues[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lambda = DVector::from_column_slice(&self.eigenvalues);
        let scaled = &self.eigenvectors * DMatrix::from_diagonal(&lambda);
        scaled * self.eigenvectors.transpose()
    }

    /// First `r` eigenvector columns.
    pub fn leading_vectors(&self, r: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, r).into_owned()
    }
}

pub(crate) fn ensure_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

/// Full eigendecomposition with eigenvalues sorted in descending order.
///
/// Each eigenvector is sign-normalized so its first coordinate with magnitude
/// above 1e-12 is positive. Ordering among tied eigenvalues is unspecified.
pub fn sym_eig_desc(a: &SymmetricMatrix) -> Result<SpectralDecomposition> {
    let m = a.matrix().clone();
    let n = m.nrows();
    let eig = m.try_symmetric_eigen(EIG_EPS, EIG_MAX_ITER).ok_or_else(|| {
        Error::NumericalFailure(format!("symmetric eigensolver did not converge (n = {n})"))
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).into_owned();
        normalize_sign(col.as_mut_slice());
        eigenvectors.set_column(dst, &col);
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("eigensolver produced non-finite eigenvalues".into()));
    }
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

pub(crate) fn normalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_TOL) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(a)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    // Work on the smaller Gram side: ‖A‖₂² = λ_max(AᵀA) = λ_max(AAᵀ).
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let eig = sym_eig_desc(&SymmetricMatrix::from_exact(symmetrize(gram)))?;
    Ok(eig.eigenvalues[0].max(0.0).sqrt())
}

/// Spectral norm of a symmetric matrix: the largest absolute eigenvalue.
pub fn symmetric_spectral_norm(a: &SymmetricMatrix) -> Result<f64> {
    let eig = sym_eig_desc(a)?;
    let first = eig.eigenvalues[0].abs();
    let last = eig.eigenvalues[eig.eigenvalues.len() - 1].abs();
    Ok(first.max(last))
}

fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// `max_i Σ_j |A_ij|`.
pub fn inf_norm(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(a)?;
    Ok(a.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `max_ij |A_ij|`.
pub fn max_norm(a: &DMatrix<f64>) -> Result<f64> {
    ensure_finite(a)?;
    Ok(a.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Orthogonal matrix aligning `U` to `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub rotation: DMatrix<f64>,
    /// `UᵀV` was rank deficient, so the minimizer is not unique.
    pub degenerate: bool,
}

/// Minimizer of `‖UR − V‖_F` over orthogonal `R` (reflections allowed),
/// built from the SVD `UᵀV = W S Zᵀ` as `R = W Zᵀ`.
pub fn procrustes_rotation(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Procrustes> {
    if u.shape() != v.shape() {
        return Err(Error::invalid(format!(
            "procrustes shapes differ: {:?} vs {:?}",
            u.shape(),
            v.shape()
        )));
    }
    let (n, r) = u.shape();
    if r == 0 || n < r {
        return Err(Error::invalid(format!("procrustes needs N >= r >= 1, got N={n}, r={r}")));
    }
    ensure_finite(u)?;
    ensure_finite(v)?;
    let cross = u.transpose() * v;
    let svd = cross
        .try_svd(true, true, EIG_EPS, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD of UᵀV did not converge".into()))?;
    let w = svd.u.as_ref().expect("requested U");
    let zt = svd.v_t.as_ref().expect("requested Vᵀ");
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = smax == 0.0 || smin <= 1e-12 * smax;
    Ok(Procrustes { rotation: w * zt, degenerate })
}
