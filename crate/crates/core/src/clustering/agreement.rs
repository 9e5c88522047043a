//! Permutation-invariant agreement between two labelings.

use itertools::Itertools;

use super::LabelVector;
use crate::error::{Error, Result};

/// Largest `k` handled by exhaustive permutation search.
pub const BRUTE_FORCE_MAX_K: usize = 6;

/// Counts `c[a][b]` of points labelled `a + 1` in `u` and `b + 1` in `v`,
/// padded to a square `max(k_u, k_v)` table.
pub fn confusion_matrix(u: &LabelVector, v: &LabelVector) -> Result<Vec<Vec<usize>>> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!(
            "label vectors differ in length ({} vs {})",
            u.len(),
            v.len()
        )));
    }
    let k = u.k().max(v.k());
    let mut c = vec![vec![0usize; k]; k];
    for (&a, &b) in u.as_slice().iter().zip(v.as_slice()) {
        c[a - 1][b - 1] += 1;
    }
    Ok(c)
}

/// Fraction of points on which `u` and a relabelled `v` agree, maximized
/// over all relabellings.
pub fn agreement(u: &LabelVector, v: &LabelVector) -> Result<f64> {
    let c = confusion_matrix(u, v)?;
    let best = if c.len() <= BRUTE_FORCE_MAX_K { best_brute_force(&c) } else { best_matching(&c) };
    Ok(best as f64 / u.len() as f64)
}

/// Agreement by exhaustive search over all permutations.
pub fn agreement_brute_force(u: &LabelVector, v: &LabelVector) -> Result<f64> {
    Ok(best_brute_force(&confusion_matrix(u, v)?) as f64 / u.len() as f64)
}

/// Agreement by maximum-weight perfect matching on the confusion table.
pub fn agreement_matching(u: &LabelVector, v: &LabelVector) -> Result<f64> {
    Ok(best_matching(&confusion_matrix(u, v)?) as f64 / u.len() as f64)
}

fn best_brute_force(c: &[Vec<usize>]) -> usize {
    let k = c.len();
    (0..k)
        .permutations(k)
        .map(|p| p.iter().enumerate().map(|(a, &b)| c[a][b]).sum::<usize>())
        .max()
        .unwrap_or(0)
}

/// Hungarian algorithm (shortest augmenting paths with potentials) on the
/// cost `max − c`, which turns the maximization into a minimization.
fn best_matching(c: &[Vec<usize>]) -> usize {
    let k = c.len();
    if k == 0 {
        return 0;
    }
    let top = c.iter().flatten().copied().max().unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| top - c[i - 1][j - 1] as i64;
    // 1-based arrays; column 0 is the virtual root.
    let mut u = vec![0i64; k + 1];
    let mut v = vec![0i64; k + 1];
    let mut row_of = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=k {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=k).map(|j| c[row_of[j] - 1][j - 1]).sum()
}
