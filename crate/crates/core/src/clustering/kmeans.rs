//! Lloyd's k-means with furthest-point initialization.

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;

use super::certificate::{check_rows, row_sq_distance};
use super::LabelVector;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Independent initializations; the lowest objective wins.
    pub restarts: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions { max_iter: 300, restarts: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: LabelVector,
    pub centroids: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Within-cluster scatter together with the clusters that had no points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeansObjective {
    pub value: f64,
    /// 1-based labels of empty clusters (they contribute 0).
    pub empty_clusters: Vec<usize>,
}

pub fn kmeans(y: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> Result<LabelVector> {
    Ok(kmeans_with(y, k, seed, KMeansOptions { max_iter, restarts: 1 })?.labels)
}

pub fn kmeans_with(y: &DMatrix<f64>, k: usize, seed: u64, opts: KMeansOptions) -> Result<KMeansResult> {
    let n = y.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    if opts.restarts == 0 {
        return Err(Error::invalid("restarts must be at least 1"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("coordinates contain non-finite values"));
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..opts.restarts {
        let run_seed = if restart == 0 { seed } else { derive_seed(seed, "kmeans-restart", &[restart as u64]) };
        let run = lloyd(y, k, run_seed, opts.max_iter);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn furthest_point_init(y: &DMatrix<f64>, k: usize, seed: u64) -> Vec<usize> {
    let n = y.nrows();
    let first = rng_from_seed(seed).random_range(0..n);
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|i| row_sq_distance(y, i, first)).collect();
    while chosen.len() < k {
        let mut pick = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if pick.is_none_or(|p: usize| nearest[i] > nearest[p]) {
                pick = Some(i);
            }
        }
        let p = pick.expect("k <= n leaves an unchosen point");
        chosen.push(p);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(row_sq_distance(y, i, p));
        }
    }
    chosen
}

fn sq_dist_to(y: &DMatrix<f64>, i: usize, c: &DMatrix<f64>, m: usize) -> f64 {
    (0..y.ncols()).map(|j| (y[(i, j)] - c[(m, j)]).powi(2)).sum()
}

fn nearest_centroid(y: &DMatrix<f64>, i: usize, c: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut best_d = sq_dist_to(y, i, c, 0);
    for m in 1..c.nrows() {
        let d = sq_dist_to(y, i, c, m);
        if d < best_d {
            best = m;
            best_d = d;
        }
    }
    best
}

fn lloyd(y: &DMatrix<f64>, k: usize, seed: u64, max_iter: usize) -> KMeansResult {
    let (n, dim) = y.shape();
    let init = furthest_point_init(y, k, seed);
    let mut centroids = DMatrix::from_fn(k, dim, |m, j| y[(init[m], j)]);
    let mut assign: Vec<usize> = (0..n).map(|i| nearest_centroid(y, i, &centroids)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        update_centroids(y, &mut assign, &mut centroids);
        let next: Vec<usize> = (0..n).map(|i| nearest_centroid(y, i, &centroids)).collect();
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
    }
    let labels = LabelVector::from_zero_based(&assign, k).expect("assignments in range");
    let objective = objective_value(y, &assign, k);
    KMeansResult { labels, centroids, objective, iterations, converged }
}

/// Means of the assigned points. An empty cluster takes over the point that
/// is currently farthest from its own centroid.
fn update_centroids(y: &DMatrix<f64>, assign: &mut [usize], centroids: &mut DMatrix<f64>) {
    let (k, dim) = centroids.shape();
    loop {
        let mut sums = DMatrix::<f64>::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &m) in assign.iter().enumerate() {
            counts[m] += 1;
            for j in 0..dim {
                sums[(m, j)] += y[(i, j)];
            }
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            for m in 0..k {
                for j in 0..dim {
                    centroids[(m, j)] = sums[(m, j)] / counts[m] as f64;
                }
            }
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &m) in assign.iter().enumerate() {
            if counts[m] < 2 {
                continue;
            }
            let d = sq_dist_to(y, i, centroids, m);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("an empty cluster implies a cluster with two or more points");
        assign[i] = empty;
        for j in 0..dim {
            centroids[(empty, j)] = y[(i, j)];
        }
    }
}

fn objective_value(y: &DMatrix<f64>, assign: &[usize], k: usize) -> f64 {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &m) in assign.iter().enumerate() {
        members[m].push(i);
    }
    members
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            let mut total = 0.0;
            for (a, &i) in s.iter().enumerate() {
                for &j in &s[a + 1..] {
                    total += row_sq_distance(y, i, j);
                }
            }
            // Ordered pairs count each unordered pair twice: 2·total / (2|S|).
            total / s.len() as f64
        })
        .sum()
}

/// `Σ_m 1/(2|S_m|) Σ_{i,j ∈ S_m} ‖y_i − y_j‖²`.
pub fn kmeans_objective(y: &DMatrix<f64>, labels: &LabelVector) -> Result<KMeansObjective> {
    check_rows(y, labels)?;
    let empty_clusters = labels
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(m, _)| m + 1)
        .collect();
    Ok(KMeansObjective { value: objective_value(y, &labels.zero_based(), labels.k()), empty_clusters })
}

/// Whether moving any single point to any other cluster fails to decrease
/// the objective, i.e. the labelling is a local minimum under single moves.
/// Moves that would empty a cluster are skipped.
pub fn is_single_move_local_minimum(y: &DMatrix<f64>, labels: &LabelVector) -> Result<bool> {
    let base = kmeans_objective(y, labels)?.value;
    let tol = 1e-12 * base.max(f64::MIN_POSITIVE);
    let counts = labels.counts();
    let mut moved = labels.as_slice().to_vec();
    for i in 0..moved.len() {
        let own = moved[i];
        if counts[own - 1] < 2 {
            continue;
        }
        for target in 1..=labels.k() {
            if target == own {
                continue;
            }
            moved[i] = target;
            let cand = LabelVector::new(moved.clone(), labels.k())?;
            if kmeans_objective(y, &cand)?.value < base - tol {
                return Ok(false);
            }
        }
        moved[i] = own;
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::agreement;
    use rand::SeedableRng;

    #[test]
    fn singletons_have_zero_objective() {
        let y = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0]);
        let r = kmeans_with(&y, 4, 3, KMeansOptions::default()).unwrap();
        assert_eq!(r.objective, 0.0);
        let mut seen = r.labels.as_slice().to_vec();
        seen.sort();
        assert_eq!(seen, vec![1, 2, 3, 4]);
    }

    #[test]
    fn separated_pairs() {
        let y = DMatrix::from_row_slice(4, 1, &[0.0, 0.1, 10.0, 10.1]);
        let truth = LabelVector::new(vec![1, 1, 2, 2], 2).unwrap();
        for seed in 0..10 {
            let l = kmeans(&y, 2, seed, 100).unwrap();
            assert_eq!(agreement(&l, &truth).unwrap(), 1.0);
        }
    }

    #[test]
    fn rejects_bad_k() {
        let y = DMatrix::zeros(3, 1);
        assert!(kmeans(&y, 4, 0, 10).is_err());
        assert!(kmeans(&y, 0, 0, 10).is_err());
    }

    #[test]
    fn objective_examples() {
        let y = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let one = LabelVector::new(vec![1, 1], 1).unwrap();
        assert_eq!(kmeans_objective(&y, &one).unwrap().value, 2.0);
        let apart = LabelVector::new(vec![1, 2], 3).unwrap();
        let o = kmeans_objective(&y, &apart).unwrap();
        assert_eq!(o.value, 0.0);
        assert_eq!(o.empty_clusters, vec![3]);
    }

    #[test]
    fn objective_matches_centroid_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let n = rng.random_range(2..40);
            let y = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let l: Vec<usize> = (0..n).map(|_| rng.random_range(1..=4)).collect();
            let labels = LabelVector::new(l.clone(), 4).unwrap();
            let mut oracle = 0.0;
            for m in 1..=4 {
                let rows: Vec<usize> = (0..n).filter(|&i| l[i] == m).collect();
                if rows.is_empty() {
                    continue;
                }
                let c = rows.iter().fold(nalgebra::RowDVector::zeros(3), |a, &i| a + y.row(i))
                    / rows.len() as f64;
                oracle += rows.iter().map(|&i| (y.row(i) - &c).norm_squared()).sum::<f64>();
            }
            let got = kmeans_objective(&y, &labels).unwrap().value;
            assert!((got - oracle).abs() <= 1e-8 * oracle.max(1.0));
        }
    }

    #[test]
    fn deterministic_for_seed_and_reseeds_empty_clusters() {
        // Duplicates force an empty cluster after the first assignment.
        let y = DMatrix::from_row_slice(5, 1, &[0.0, 0.0, 0.0, 1.0, 1.0]);
        let a = kmeans_with(&y, 3, 5, KMeansOptions::default()).unwrap();
        let b = kmeans_with(&y, 3, 5, KMeansOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labels.len(), 5);
    }

    #[test]
    fn restarts_never_worsen_the_objective() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let y = DMatrix::from_fn(60, 2, |_, _| rng.random::<f64>());
        let one = kmeans_with(&y, 5, 9, KMeansOptions { max_iter: 100, restarts: 1 }).unwrap();
        let many = kmeans_with(&y, 5, 9, KMeansOptions { max_iter: 100, restarts: 8 }).unwrap();
        assert!(many.objective <= one.objective);
    }

    #[test]
    fn local_minimum_scan_detects_a_bad_labelling() {
        let y = DMatrix::from_row_slice(4, 1, &[0.0, 0.1, 10.0, 10.1]);
        let good = LabelVector::new(vec![1, 1, 2, 2], 2).unwrap();
        let bad = LabelVector::new(vec![1, 2, 2, 2], 2).unwrap();
        assert!(is_single_move_local_minimum(&y, &good).unwrap());
        assert!(!is_single_move_local_minimum(&y, &bad).unwrap());
    }
}
