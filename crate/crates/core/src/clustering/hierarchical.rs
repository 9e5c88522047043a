//! Greedy agglomerative clustering cut at `k` clusters.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::certificate::row_distance;
use super::LabelVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Minimum cross distance.
    Single,
    /// Maximum cross distance.
    Complete,
    /// Mean cross distance.
    Average,
    /// `2·mean cross − mean within A − mean within B`, within means over
    /// ordered pairs including the zero diagonal.
    Energy,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Energy => "energy",
        }
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Linkage::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown linkage '{s}'")))
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn validate(y: &DMatrix<f64>, k: usize) -> Result<()> {
    let n = y.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("coordinates contain non-finite values"));
    }
    Ok(())
}

/// Single linkage goes through the minimum spanning tree, which gives the
/// same partition as naive agglomeration in `O(N²)`; the other linkages run
/// the naive `O(N³)` loop.
pub fn hierarchical(y: &DMatrix<f64>, k: usize, linkage: Linkage) -> Result<LabelVector> {
    validate(y, k)?;
    match linkage {
        Linkage::Single => Ok(single_linkage_mst(y, k)),
        _ => Ok(agglomerate(y, k, linkage)),
    }
}

/// Plain agglomeration for any linkage, exposed as a reference path.
pub fn hierarchical_naive(y: &DMatrix<f64>, k: usize, linkage: Linkage) -> Result<LabelVector> {
    validate(y, k)?;
    Ok(agglomerate(y, k, linkage))
}

/// Labels numbered by each cluster's smallest member index.
fn labels_from_roots(roots: &[usize], k: usize) -> LabelVector {
    let mut id = vec![usize::MAX; roots.len()];
    let mut next = 0;
    let labels = roots
        .iter()
        .map(|&r| {
            if id[r] == usize::MAX {
                id[r] = next;
                next += 1;
            }
            id[r] + 1
        })
        .collect();
    LabelVector::new(labels, k).expect("exactly k clusters")
}

fn agglomerate(y: &DMatrix<f64>, k: usize, linkage: Linkage) -> LabelVector {
    let n = y.nrows();
    // Pairwise tables between active slots; slot = smallest member index.
    let mut table = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { row_distance(y, i, j) });
    let mut size = vec![1usize; n];
    // Sum of ordered within-cluster distances, for energy linkage.
    let mut within = vec![0.0f64; n];
    let mut owner: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();

    let score = |table: &DMatrix<f64>, size: &[usize], within: &[f64], a: usize, b: usize| {
        let t = table[(a, b)];
        match linkage {
            Linkage::Single | Linkage::Complete => t,
            Linkage::Average => t / (size[a] * size[b]) as f64,
            Linkage::Energy => {
                let (na, nb) = (size[a] as f64, size[b] as f64);
                2.0 * t / (na * nb) - within[a] / (na * na) - within[b] / (nb * nb)
            }
        }
    };

    while active.len() > k {
        let mut best = (f64::INFINITY, 0, 0);
        for (ia, &a) in active.iter().enumerate() {
            for &b in &active[ia + 1..] {
                let s = score(&table, &size, &within, a, b);
                if s < best.0 {
                    best = (s, a, b);
                }
            }
        }
        let (_, a, b) = best;
        if best.0.is_infinite() {
            // Only reachable with infinite scores, which validation rules out.
            unreachable!("finite coordinates give finite linkage scores");
        }
        within[a] += within[b] + 2.0 * table[(a, b)];
        for &c in &active {
            if c == a || c == b {
                continue;
            }
            let merged = match linkage {
                Linkage::Single => table[(a, c)].min(table[(b, c)]),
                Linkage::Complete => table[(a, c)].max(table[(b, c)]),
                Linkage::Average | Linkage::Energy => table[(a, c)] + table[(b, c)],
            };
            table[(a, c)] = merged;
            table[(c, a)] = merged;
        }
        size[a] += size[b];
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
        active.retain(|&c| c != b);
    }
    labels_from_roots(&owner, k)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the smaller index as root so labels follow first appearance.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

fn single_linkage_mst(y: &DMatrix<f64>, k: usize) -> LabelVector {
    let n = y.nrows();
    // Prim's algorithm on the complete graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0usize; n];
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n.saturating_sub(1));
    in_tree[0] = true;
    for j in 1..n {
        best[j] = row_distance(y, 0, j);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((best[next], link[next].min(next), link[next].max(next)));
        for j in 0..n {
            if !in_tree[j] {
                let d = row_distance(y, next, j);
                if d < best[j] {
                    best[j] = d;
                    link[j] = next;
                }
            }
        }
    }
    // Keeping the n − k shortest edges reproduces the merges of the greedy loop.
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut parent: Vec<usize> = (0..n).collect();
    for &(_, a, b) in edges.iter().take(n - k) {
        union(&mut parent, a, b);
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    labels_from_roots(&roots, k)
}

/// Connected components of the graph joining points at distance `≤ eps`.
pub fn threshold_components(y: &DMatrix<f64>, eps: f64) -> LabelVector {
    let n = y.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if row_distance(y, i, j) <= eps {
                union(&mut parent, i, j);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let k = {
        let mut r = roots.clone();
        r.sort_unstable();
        r.dedup();
        r.len()
    };
    labels_from_roots(&roots, k)
}

/// Linkage value between two explicit point sets.
pub fn linkage_distance(y: &DMatrix<f64>, a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let cross = || a.iter().flat_map(|&i| b.iter().map(move |&j| row_distance(y, i, j)));
    let within = |s: &[usize]| {
        s.iter().flat_map(|&i| s.iter().map(move |&j| row_distance(y, i, j))).sum::<f64>()
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    match linkage {
        Linkage::Single => cross().fold(f64::INFINITY, f64::min),
        Linkage::Complete => cross().fold(0.0, f64::max),
        Linkage::Average => cross().sum::<f64>() / (na * nb),
        Linkage::Energy => {
            2.0 * cross().sum::<f64>() / (na * nb) - within(a) / (na * na) - within(b) / (nb * nb)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::agreement;
    use rand::{Rng, SeedableRng};

    #[test]
    fn k_equals_n_gives_singletons() {
        let y = DMatrix::from_row_slice(4, 1, &[3.0, 1.0, 2.0, 0.0]);
        for l in Linkage::ALL {
            assert_eq!(hierarchical(&y, 4, l).unwrap().as_slice(), &[1, 2, 3, 4]);
        }
    }

    #[test]
    fn energy_of_two_singletons() {
        let y = DMatrix::from_row_slice(2, 1, &[0.0, 3.0]);
        assert_eq!(linkage_distance(&y, &[0], &[1], Linkage::Energy), 6.0);
    }

    #[test]
    fn linkage_formulas_on_small_sets() {
        let y = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 4.0, 6.0]);
        let (a, b) = ([0, 1], [2, 3]);
        assert_eq!(linkage_distance(&y, &a, &b, Linkage::Single), 3.0);
        assert_eq!(linkage_distance(&y, &a, &b, Linkage::Complete), 6.0);
        assert_eq!(linkage_distance(&y, &a, &b, Linkage::Average), 4.5);
        // 2·4.5 − 2/4 − 4/4
        assert_eq!(linkage_distance(&y, &a, &b, Linkage::Energy), 7.5);
    }

    #[test]
    fn rejects_bad_k() {
        let y = DMatrix::zeros(3, 2);
        assert!(hierarchical(&y, 0, Linkage::Single).is_err());
        assert!(hierarchical(&y, 4, Linkage::Average).is_err());
    }

    /// Naive agglomeration recomputing every linkage from scratch.
    fn brute_agglomerate(y: &DMatrix<f64>, k: usize, linkage: Linkage) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = (0..y.nrows()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let s = linkage_distance(y, &clusters[a], &clusters[b], linkage);
                    if s < best.0 {
                        best = (s, a, b);
                    }
                }
            }
            let moved = clusters.remove(best.2);
            clusters[best.1].extend(moved);
        }
        clusters
    }

    #[test]
    fn table_updates_match_recomputed_linkages() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for trial in 0..40 {
            let n = rng.random_range(3..18);
            let k = rng.random_range(1..=n);
            let y = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>());
            for l in Linkage::ALL {
                let got = hierarchical_naive(&y, k, l).unwrap();
                let mut oracle = vec![0; n];
                for (m, c) in brute_agglomerate(&y, k, l).iter().enumerate() {
                    for &i in c {
                        oracle[i] = m + 1;
                    }
                }
                let oracle = LabelVector::new(oracle, k).unwrap();
                assert_eq!(agreement(&got, &oracle).unwrap(), 1.0, "trial {trial} {l}");
            }
        }
    }

    #[test]
    fn mst_single_linkage_matches_naive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let n = rng.random_range(2..40);
            let k = rng.random_range(1..=n);
            let y = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>());
            let fast = hierarchical(&y, k, Linkage::Single).unwrap();
            let slow = hierarchical_naive(&y, k, Linkage::Single).unwrap();
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn single_linkage_equals_threshold_components() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 30 {
            let k = rng.random_range(2..5);
            let n_per = rng.random_range(1..6);
            let y = DMatrix::from_fn(k * n_per, 2, |i, _| (i / n_per) as f64 * 5.0 + rng.random::<f64>());
            let truth = LabelVector::blocks(&vec![n_per; k]).unwrap();
            let cert = crate::clustering::pgr_check(&y, &truth).unwrap();
            if cert.d_btw <= cert.d_in {
                continue;
            }
            let eps = 0.5 * (cert.d_in + cert.d_btw);
            let comps = threshold_components(&y, eps);
            let single = hierarchical(&y, comps.k(), Linkage::Single).unwrap();
            assert_eq!(single, comps);
            checked += 1;
        }
    }
}
