//! Distance-based clustering kernels and silhouette-driven choice of k.

mod distance;
mod kmeans;
mod kmedoids;
mod silhouette;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use distance::{euclidean, nearest_center, sq_euclidean, DistanceMatrix, Euclidean, Metric};
pub use kmeans::{kmeans_fit, KMeansConfig};
pub use kmedoids::{kmedoids_fit, KMedoidsConfig};
pub use silhouette::{silhouette_from_distances, silhouette_score};

use crate::rng::derive_seed;
use crate::{Error, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    KMedoids,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::KMedoids => "kmedoids",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            "kmedoids" | "k-medoids" | "pam" => Ok(Algorithm::KMedoids),
            other => Err(Error::invalid(format!("unknown algorithm `{other}` (expected kmeans or kmedoids)"))),
        }
    }
}

/// Outcome of one clustering of one feature subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ClusteringResult<T> {
    pub assignments: Vec<usize>,
    /// Cluster means (k-means) or medoid rows (k-medoids), `k x subset width`.
    #[serde(with = "crate::serde_rows")]
    pub centers: Array2<T>,
    pub k: usize,
    /// Sum of squared distances (k-means) or of distances (k-medoids).
    pub objective: T,
    /// Filled in by [`best_k_clustering`]; undefined for k = 1.
    pub silhouette: Option<T>,
    pub feature_subset: Vec<usize>,
    /// Row indices of the medoids, k-medoids only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medoids: Option<Vec<usize>>,
    /// Objective after every center update (k-means) or accepted swap.
    #[serde(default)]
    pub trace: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> ClusteringResult<T> {
    pub(crate) fn with_medoids(mut self, medoids: Vec<usize>) -> Self {
        self.medoids = Some(medoids);
        self
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.assignments.iter().for_each(|&a| sizes[a] += 1);
        sizes
    }

    /// JSON diagnostic dump.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("clustering results always serialize")
    }
}

pub(crate) fn check_k(n_rows: usize, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::invalid("cluster count must be at least 1"));
    }
    if k > n_rows {
        return Err(Error::invalid(format!("cluster count {k} exceeds {n_rows} rows")));
    }
    Ok(())
}

/// Kernel settings shared by every clustering run of a fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kmeans: KMeansConfig,
    pub kmedoids: KMedoidsConfig,
}

/// Clusters with k = 2..=k_max and keeps the highest silhouette, ties to the
/// smaller k. `k_max` is lowered to `n_rows - 1` and to the number of
/// distinct points when needed.
pub fn best_k_clustering<T: Scalar>(
    points: ArrayView2<'_, T>,
    k_max: usize,
    algorithm: Algorithm,
    seed: u64,
    config: &EngineConfig,
) -> Result<ClusteringResult<T>> {
    let n = points.nrows();
    if k_max < 2 {
        return Err(Error::invalid(format!("k_max must be at least 2, got {k_max}")));
    }
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 rows to choose k by silhouette, got {n}")));
    }
    let points = points.as_standard_layout();
    let dm = DistanceMatrix::euclidean(points.view());
    // coincident centers could not be told apart when routing
    let unique = (0..n).filter(|&i| (0..i).all(|j| dm.get(i, j) > T::zero())).count();
    if unique < 2 {
        return Err(Error::invalid("need at least two distinct points to cluster"));
    }
    let k_hi = k_max.min(n - 1).min(unique);
    let mut best: Option<ClusteringResult<T>> = None;
    for k in 2..=k_hi {
        let mut fit = match algorithm {
            Algorithm::KMeans => kmeans_fit(points.view(), k, derive_seed(seed, &[k as u64]), &config.kmeans)?,
            Algorithm::KMedoids => kmedoids::kmedoids_with_distances(points.view(), &dm, k, &config.kmedoids),
        };
        let s = silhouette_from_distances(&dm, &fit.assignments)?;
        fit.silhouette = Some(s);
        if best.as_ref().is_none_or(|b| s > b.silhouette.expect("set above")) {
            best = Some(fit);
        }
    }
    Ok(best.expect("k range is non-empty"))
}
