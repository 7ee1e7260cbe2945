//! Partitioning around medoids: greedy BUILD followed by best-improvement
//! SWAP. Swap deltas for all medoids are evaluated in one pass per candidate
//! (the FastPAM1 bookkeeping), which selects the same swap as classic PAM.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::distance::DistanceMatrix;
use super::{check_k, ClusteringResult};
use crate::{Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMedoidsConfig {
    /// Maximum number of accepted swaps.
    pub max_iter: usize,
}

impl Default for KMedoidsConfig {
    fn default() -> Self {
        KMedoidsConfig { max_iter: 300 }
    }
}

/// Fits k-medoids on Euclidean distances. BUILD and SWAP are deterministic,
/// so no seed is involved.
pub fn kmedoids_fit<T: Scalar>(points: ArrayView2<'_, T>, k: usize, config: &KMedoidsConfig) -> Result<ClusteringResult<T>> {
    check_k(points.nrows(), k)?;
    let dm = DistanceMatrix::euclidean(points);
    Ok(kmedoids_with_distances(points, &dm, k, config))
}

/// Nearest and second-nearest medoid for every point.
struct Cache<T> {
    near: Vec<usize>,
    dn: Vec<T>,
    ds: Vec<T>,
}

impl<T: Scalar> Cache<T> {
    fn build(dm: &DistanceMatrix<T>, medoids: &[usize]) -> Self {
        let n = dm.len();
        let mut cache = Cache { near: vec![0; n], dn: vec![T::zero(); n], ds: vec![T::zero(); n] };
        for j in 0..n {
            let (mut bi, mut bd, mut sd) = (0, T::infinity(), T::infinity());
            for (slot, &m) in medoids.iter().enumerate() {
                let d = dm.get(m, j);
                if d < bd {
                    sd = bd;
                    bd = d;
                    bi = slot;
                } else if d < sd {
                    sd = d;
                }
            }
            cache.near[j] = bi;
            cache.dn[j] = bd;
            cache.ds[j] = sd;
        }
        // a medoid always belongs to its own cluster
        for (slot, &m) in medoids.iter().enumerate() {
            cache.near[m] = slot;
        }
        cache
    }

    fn cost(&self) -> T {
        self.dn.iter().copied().sum()
    }
}

pub(crate) fn kmedoids_with_distances<T: Scalar>(
    points: ArrayView2<'_, T>,
    dm: &DistanceMatrix<T>,
    k: usize,
    config: &KMedoidsConfig,
) -> ClusteringResult<T> {
    let n = dm.len();
    let mut medoids = build(dm, k);
    let mut cache = Cache::build(dm, &medoids);
    let mut trace = vec![cache.cost()];
    let mut iterations = 0;
    if k > 1 {
        while iterations < config.max_iter {
            let Some((slot, h, delta)) = best_swap(dm, &medoids, &cache) else { break };
            let current = *trace.last().expect("non-empty trace");
            if delta >= -(current * T::of(1e-12)) {
                break;
            }
            medoids[slot] = h;
            cache = Cache::build(dm, &medoids);
            let cost = cache.cost();
            debug_assert!(cost <= current, "accepted swap increased cost: {current} -> {cost}");
            trace.push(cost);
            iterations += 1;
        }
    }
    debug_assert_eq!(cache.near.len(), n);
    ClusteringResult {
        k,
        objective: *trace.last().expect("non-empty trace"),
        assignments: cache.near,
        centers: points.select(Axis(0), &medoids),
        silhouette: None,
        medoids: None,
        feature_subset: (0..points.ncols()).collect(),
        trace,
        iterations,
    }
    .with_medoids(medoids)
}

/// Greedy BUILD: the most central point first, then repeatedly the point that
/// lowers total distance the most. Ties go to the lowest index.
fn build<T: Scalar>(dm: &DistanceMatrix<T>, k: usize) -> Vec<usize> {
    let n = dm.len();
    let first = (0..n)
        .map(|i| (i, dm.row(i).iter().copied().sum::<T>()))
        .fold((0, T::infinity()), |best, (i, s)| if s < best.1 { (i, s) } else { best })
        .0;
    let mut medoids = vec![first];
    let mut dn: Vec<T> = dm.row(first).to_vec();
    while medoids.len() < k {
        let mut best = (usize::MAX, T::neg_infinity());
        for c in 0..n {
            if medoids.contains(&c) {
                continue;
            }
            let gain: T = dm
                .row(c)
                .iter()
                .zip(&dn)
                .map(|(&d, &cur)| if d < cur { cur - d } else { T::zero() })
                .sum();
            if gain > best.1 {
                best = (c, gain);
            }
        }
        let c = best.0;
        medoids.push(c);
        for (cur, &d) in dn.iter_mut().zip(dm.row(c)) {
            if d < *cur {
                *cur = d;
            }
        }
    }
    medoids
}

/// Best (slot, candidate, delta) over all swaps; ties to the lowest candidate
/// then lowest slot.
fn best_swap<T: Scalar>(dm: &DistanceMatrix<T>, medoids: &[usize], cache: &Cache<T>) -> Option<(usize, usize, T)> {
    let n = dm.len();
    let k = medoids.len();
    let mut removal = vec![T::zero(); k];
    for j in 0..n {
        removal[cache.near[j]] += cache.ds[j] - cache.dn[j];
    }
    let mut best: Option<(usize, usize, T)> = None;
    let mut delta = vec![T::zero(); k];
    for h in 0..n {
        if medoids.contains(&h) {
            continue;
        }
        delta.copy_from_slice(&removal);
        let mut shared = T::zero();
        for (j, &dhj) in dm.row(h).iter().enumerate() {
            let (dn, ds, nj) = (cache.dn[j], cache.ds[j], cache.near[j]);
            if dhj < dn {
                shared += dhj - dn;
                delta[nj] += dn - ds;
            } else if dhj < ds {
                delta[nj] += dhj - ds;
            }
        }
        for (slot, &d) in delta.iter().enumerate() {
            let total = d + shared;
            if best.is_none_or(|b| total < b.2) {
                best = Some((slot, h, total));
            }
        }
    }
    best
}

#[cfg(test)]
pub(crate) fn total_cost<T: Scalar>(dm: &DistanceMatrix<T>, medoids: &[usize]) -> T {
    (0..dm.len())
        .map(|j| medoids.iter().map(|&m| dm.get(m, j)).fold(T::infinity(), T::min))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn medoids_of_separated_pairs() {
        let x = array![[0.0], [0.1], [10.0], [10.1]];
        let dm = DistanceMatrix::euclidean(x.view());
        // oracle: every pair of medoids, cost 0.2 at the optimum
        let mut best = f64::INFINITY;
        for a in 0..4 {
            for b in (a + 1)..4 {
                best = best.min(total_cost(&dm, &[a, b]));
            }
        }
        assert_abs_diff_eq!(best, 0.2, epsilon = 1e-12);
        let r = kmedoids_fit(x.view(), 2, &KMedoidsConfig::default()).unwrap();
        assert_abs_diff_eq!(r.objective, best, epsilon = 1e-12);
        let meds = r.medoids.clone().unwrap();
        assert!(meds.iter().any(|&m| m < 2) && meds.iter().any(|&m| m >= 2));
        for (slot, &m) in meds.iter().enumerate() {
            assert_eq!(r.assignments[m], slot);
            assert_eq!(r.centers.row(slot), x.row(m));
        }
    }

    #[test]
    fn k_equal_to_n() {
        let x = array![[0.0, 0.0], [1.0, 3.0], [4.0, 4.0]];
        let r = kmedoids_fit(x.view(), 3, &KMedoidsConfig::default()).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn duplicates_with_one_cluster() {
        let x = array![[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]];
        let r = kmedoids_fit(x.view(), 1, &KMedoidsConfig::default()).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn swap_finds_optimum_build_misses() {
        // BUILD picks the central point first; SWAP must repair it
        let x = array![[0.0], [1.0], [2.0], [6.0], [7.0], [8.0], [4.0]];
        let r = kmedoids_fit(x.view(), 2, &KMedoidsConfig::default()).unwrap();
        let dm = DistanceMatrix::euclidean(x.view());
        let mut best = f64::INFINITY;
        for a in 0..7 {
            for b in (a + 1)..7 {
                best = best.min(total_cost(&dm, &[a, b]));
            }
        }
        assert_abs_diff_eq!(r.objective, best, epsilon = 1e-12);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
