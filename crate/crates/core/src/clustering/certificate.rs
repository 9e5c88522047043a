use nalgebra::DMatrix;
use serde::Serialize;

use super::LabelVector;
use crate::error::{Error, Result};

/// Largest within-cluster and smallest between-cluster distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryCertificate {
    pub d_in: f64,
    pub d_btw: f64,
    /// `d_btw > 2·d_in`: the embedding is a perfect geometric representation.
    pub is_pgr: bool,
}

pub(crate) fn check_rows(y: &DMatrix<f64>, labels: &LabelVector) -> Result<()> {
    if y.nrows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} points but {} labels",
            y.nrows(),
            labels.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("coordinates contain non-finite values"));
    }
    Ok(())
}

pub(crate) fn row_distance(y: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    row_sq_distance(y, i, j).sqrt()
}

pub(crate) fn row_sq_distance(y: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    (0..y.ncols()).map(|c| (y[(i, c)] - y[(j, c)]).powi(2)).sum()
}

/// Exhaustive pair scan.
pub fn pgr_check(y: &DMatrix<f64>, labels: &LabelVector) -> Result<RecoveryCertificate> {
    check_rows(y, labels)?;
    if labels.counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleCluster);
    }
    let l = labels.as_slice();
    let (mut d_in, mut d_btw) = (0.0f64, f64::INFINITY);
    for i in 0..y.nrows() {
        for j in i + 1..y.nrows() {
            let dist = row_distance(y, i, j);
            if l[i] == l[j] {
                d_in = d_in.max(dist);
            } else {
                d_btw = d_btw.min(dist);
            }
        }
    }
    Ok(RecoveryCertificate { d_in, d_btw, is_pgr: d_btw > 2.0 * d_in })
}
