use crate::error::{Error, Result};

/// Cluster assignments, 1-based, in `{1..k}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("number of clusters k must be at least 1"));
        }
        if labels.is_empty() {
            return Err(Error::invalid("label vector is empty"));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l == 0 || l > k) {
            return Err(Error::invalid(format!("label {l} at position {i} is outside 1..={k}")));
        }
        Ok(LabelVector { labels, k })
    }

    /// Uses the largest label as `k`.
    pub fn infer_k(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().unwrap_or(0);
        Self::new(labels, k)
    }

    pub fn from_zero_based(labels: &[usize], k: usize) -> Result<Self> {
        Self::new(labels.iter().map(|l| l + 1).collect(), k)
    }

    /// Consecutive blocks of the given sizes labelled `1, 2, …`.
    pub fn blocks(sizes: &[usize]) -> Result<Self> {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j + 1, n))
            .collect();
        Self::new(labels, sizes.len())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn zero_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l - 1).collect()
    }

    /// Points per label, index `j` for label `j + 1`.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &l in &self.labels {
            c[l - 1] += 1;
        }
        c
    }
}
