//! Label-aware evaluation of a clustering: contingency counts, the
//! completeness score, and the cluster evaluation matrix (CEM).
//!
//! Completeness here divides the conditional entropy `H(K|C)` by the joint
//! entropy `H(K,C)`, and is 1 when the joint entropy vanishes. Both scores
//! are ratios of logarithms and therefore independent of the log base; the
//! `*_in_base` variants exist so that can be checked.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Counts `n[c][k]` of label `c` in cluster `k`, restricted to the labels and
/// clusters that occur.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// `counts[label position][cluster position]`.
    pub counts: Vec<Vec<u64>>,
    pub label_ids: Vec<usize>,
    pub cluster_ids: Vec<usize>,
    pub total: u64,
}

impl ContingencyTable {
    /// Builds a table from explicit counts, labelling rows and columns
    /// `0..C` and `0..K`. All-zero label rows are dropped.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let width = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("ragged contingency table"));
        }
        let (label_ids, counts): (Vec<usize>, Vec<Vec<u64>>) = counts
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|&n| n > 0))
            .unzip();
        let total = counts.iter().flatten().sum();
        Ok(ContingencyTable { counts, label_ids, cluster_ids: (0..width).collect(), total })
    }

    pub fn n_labels(&self) -> usize {
        self.label_ids.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_ids.len()
    }

    #[inline]
    pub fn get(&self, label_pos: usize, cluster_pos: usize) -> u64 {
        self.counts[label_pos][cluster_pos]
    }

    /// Total count of each label over all clusters.
    pub fn label_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Total count of each cluster over all labels.
    pub fn cluster_totals(&self) -> Vec<u64> {
        (0..self.n_clusters())
            .map(|k| self.counts.iter().map(|r| r[k]).sum())
            .collect()
    }

    pub fn label_position(&self, label: usize) -> Option<usize> {
        self.label_ids.iter().position(|&l| l == label)
    }

    pub fn cluster_position(&self, cluster: usize) -> Option<usize> {
        self.cluster_ids.iter().position(|&c| c == cluster)
    }
}

/// Tabulates labels against cluster assignments.
pub fn contingency(labels: &[usize], assignments: &[usize]) -> Result<ContingencyTable> {
    if labels.len() != assignments.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), actual: assignments.len() });
    }
    if labels.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let mut label_ids: Vec<usize> = labels.to_vec();
    label_ids.sort_unstable();
    label_ids.dedup();
    let mut cluster_ids: Vec<usize> = assignments.to_vec();
    cluster_ids.sort_unstable();
    cluster_ids.dedup();
    let mut counts = vec![vec![0u64; cluster_ids.len()]; label_ids.len()];
    for (&l, &a) in labels.iter().zip(assignments) {
        let c = label_ids.binary_search(&l).expect("label collected above");
        let k = cluster_ids.binary_search(&a).expect("cluster collected above");
        counts[c][k] += 1;
    }
    Ok(ContingencyTable { counts, label_ids, cluster_ids, total: labels.len() as u64 })
}

pub fn completeness_score<T: Scalar>(table: &ContingencyTable) -> Result<T> {
    completeness_with(table, T::ln)
}

pub fn completeness_score_in_base<T: Scalar>(table: &ContingencyTable, base: T) -> Result<T> {
    completeness_with(table, |x: T| x.log(base))
}

fn completeness_with<T: Scalar>(table: &ContingencyTable, log: impl Fn(T) -> T) -> Result<T> {
    if table.total == 0 {
        return Err(Error::Empty("contingency table"));
    }
    let n = T::of(table.total as f64);
    let mut h_cond = T::zero();
    let mut h_joint = T::zero();
    for (row, total) in table.counts.iter().zip(table.label_totals()) {
        let total = T::of(total as f64);
        for &c in row.iter().filter(|&&c| c > 0) {
            let c = T::of(c as f64);
            h_cond -= c / n * log(c / total);
            h_joint -= c / n * log(c / n);
        }
    }
    if h_joint == T::zero() {
        return Ok(T::one());
    }
    Ok((T::one() - h_cond / h_joint).max(T::zero()).min(T::one()))
}

/// Cluster evaluation matrix, stored clusters-major (`K x C`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CemMatrix<T> {
    /// `values[cluster position][label position]`.
    pub values: Vec<Vec<T>>,
    pub cluster_ids: Vec<usize>,
    pub label_ids: Vec<usize>,
}

impl<T: Scalar> CemMatrix<T> {
    /// Entry by positions within the table.
    #[inline]
    pub fn get(&self, cluster_pos: usize, label_pos: usize) -> T {
        self.values[cluster_pos][label_pos]
    }

    /// Entry by cluster and label identifiers.
    pub fn entry(&self, cluster: usize, label: usize) -> Option<T> {
        let k = self.cluster_ids.iter().position(|&c| c == cluster)?;
        let c = self.label_ids.iter().position(|&l| l == label)?;
        Some(self.values[k][c])
    }

    /// Largest entry of a cluster row.
    pub fn cluster_max(&self, cluster_pos: usize) -> T {
        self.values[cluster_pos].iter().copied().fold(T::zero(), T::max)
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn n_labels(&self) -> usize {
        self.label_ids.len()
    }
}

/// Builds the CEM. For cluster `k` and label `c`,
///
/// `A = n_ck / sum_c n_ck * max( ln(n_ck + 1) / ln(sum_k n_ck + 1), exp(n_ck / sum_k n_ck - 1) )`
///
/// which is 0 for empty cells and lies in `[0, 1]`.
pub fn cem<T: Scalar>(table: &ContingencyTable) -> Result<CemMatrix<T>> {
    cem_with(table, T::ln)
}

pub fn cem_in_base<T: Scalar>(table: &ContingencyTable, base: T) -> Result<CemMatrix<T>> {
    cem_with(table, |x: T| x.log(base))
}

fn cem_with<T: Scalar>(table: &ContingencyTable, log: impl Fn(T) -> T) -> Result<CemMatrix<T>> {
    if table.total == 0 {
        return Err(Error::Empty("contingency table"));
    }
    let label_totals = table.label_totals();
    let cluster_totals = table.cluster_totals();
    if let Some(k) = cluster_totals.iter().position(|&t| t == 0) {
        return Err(Error::invariant(format!("cluster {} has no members", table.cluster_ids[k])));
    }
    let values = (0..table.n_clusters())
        .map(|k| {
            let col = T::of(cluster_totals[k] as f64);
            (0..table.n_labels())
                .map(|c| {
                    let n = table.get(c, k);
                    if n == 0 {
                        return T::zero();
                    }
                    let n = T::of(n as f64);
                    let row = T::of(label_totals[c] as f64);
                    let volume = log(n + T::one()) / log(row + T::one());
                    let spread = (n / row - T::one()).exp();
                    (n / col * volume.max(spread)).min(T::one())
                })
                .collect()
        })
        .collect();
    Ok(CemMatrix { values, cluster_ids: table.cluster_ids.clone(), label_ids: table.label_ids.clone() })
}
