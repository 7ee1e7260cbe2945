//! Lloyd's k-means with k-means++ seeding and best-of-n restarts.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distance::{nearest_center, sq_euclidean};
use super::{check_k, ClusteringResult};
use crate::rng::rng_for;
use crate::{Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Largest center displacement regarded as converged.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 8, max_iter: 300, tol: 1e-6 }
    }
}

/// Fits k-means. Each restart draws from its own stream derived from
/// `(seed, restart)`; the lowest objective wins, ties to the earlier restart.
pub fn kmeans_fit<T: Scalar>(
    points: ArrayView2<'_, T>,
    k: usize,
    seed: u64,
    config: &KMeansConfig,
) -> Result<ClusteringResult<T>> {
    check_k(points.nrows(), k)?;
    let points = points.as_standard_layout().into_owned();
    let mut best: Option<ClusteringResult<T>> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = rng_for(seed, &[restart as u64]);
        let init = plus_plus_init(&points, k, &mut rng);
        let fit = lloyd(&points, init, config.max_iter, T::of(config.tol));
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn row<T>(m: &Array2<T>, i: usize) -> &[T] {
    let n = m.ncols();
    &m.as_slice().expect("standard layout")[i * n..(i + 1) * n]
}

/// k-means++: first center uniform, then proportional to squared distance to
/// the closest chosen center.
fn plus_plus_init<T: Scalar>(points: &Array2<T>, k: usize, rng: &mut ChaCha8Rng) -> Array2<T> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_euclidean(row(points, i), row(points, chosen[0])).as_f64()).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    if target < w {
                        pick = i;
                        break;
                    }
                    target -= w;
                }
            }
            // guard against rounding landing on a zero-weight tail
            if d2[pick] == 0.0 {
                pick = d2.iter().rposition(|&w| w > 0.0).expect("positive total");
            }
            pick
        } else {
            // fewer distinct points than k: any unused row
            let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            unused[rng.gen_range(0..unused.len())]
        };
        chosen.push(next);
        for (i, w) in d2.iter_mut().enumerate() {
            let d = sq_euclidean(row(points, i), row(points, next)).as_f64();
            if d < *w {
                *w = d;
            }
        }
    }
    points.select(ndarray::Axis(0), &chosen)
}

fn assign_nearest<T: Scalar>(points: &Array2<T>, centers: &Array2<T>) -> Vec<usize> {
    (0..points.nrows())
        .map(|i| nearest_center(row(points, i), centers.view()).0)
        .collect()
}

/// Moves the point farthest from its own center into each empty cluster.
fn repair_empty<T: Scalar>(points: &Array2<T>, centers: &Array2<T>, assign: &mut [usize]) {
    let k = centers.nrows();
    loop {
        let mut sizes = vec![0usize; k];
        assign.iter().for_each(|&a| sizes[a] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, &a) in assign.iter().enumerate() {
            if sizes[a] < 2 {
                continue;
            }
            let d = sq_euclidean(row(points, i), row(centers, a));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => assign[i] = empty,
            None => return,
        }
    }
}

fn means<T: Scalar>(points: &Array2<T>, assign: &[usize], k: usize) -> Array2<T> {
    let d = points.ncols();
    let mut sums = Array2::<T>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        let mut s = sums.row_mut(a);
        for (acc, &v) in s.iter_mut().zip(row(points, i)) {
            *acc += v;
        }
    }
    for (mut s, &c) in sums.outer_iter_mut().zip(&counts) {
        if c > 0 {
            let c = T::of_usize(c);
            s.mapv_inplace(|v| v / c);
        }
    }
    sums
}

fn objective<T: Scalar>(points: &Array2<T>, centers: &Array2<T>, assign: &[usize]) -> T {
    assign
        .iter()
        .enumerate()
        .map(|(i, &a)| sq_euclidean(row(points, i), row(centers, a)))
        .sum()
}

fn max_shift<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    (0..a.nrows())
        .map(|j| sq_euclidean(row(a, j), row(b, j)).sqrt())
        .fold(T::zero(), T::max)
}

/// Lloyd iterations. Stops at a fixed point of the assignment, when centers
/// move less than `tol`, or after `max_iter` updates. On exit every row is
/// assigned to its nearest returned center (lowest index on ties) unless an
/// empty-cluster repair was unavoidable.
fn lloyd<T: Scalar>(points: &Array2<T>, init: Array2<T>, max_iter: usize, tol: T) -> ClusteringResult<T> {
    let k = init.nrows();
    let mut assign = assign_nearest(points, &init);
    repair_empty(points, &init, &mut assign);
    let mut centers = means(points, &assign, k);
    let mut trace = vec![objective(points, &centers, &assign)];
    let mut iterations = 0;
    let mut fixed_point = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = assign_nearest(points, &centers);
        repair_empty(points, &centers, &mut next);
        if next == assign {
            fixed_point = true;
            break;
        }
        let next_centers = means(points, &next, k);
        let shift = max_shift(&centers, &next_centers);
        assign = next;
        centers = next_centers;
        let j = objective(points, &centers, &assign);
        let prev = *trace.last().expect("non-empty trace");
        debug_assert!(
            j <= prev + prev.abs() * T::of(1e-10) + T::of(1e-12),
            "k-means objective increased: {prev} -> {j}"
        );
        trace.push(j);
        if shift < tol {
            break;
        }
    }
    if !fixed_point {
        let nearest = assign_nearest(points, &centers);
        let mut sizes = vec![0usize; k];
        nearest.iter().for_each(|&a| sizes[a] += 1);
        if sizes.iter().all(|&s| s > 0) && nearest != assign {
            assign = nearest;
            trace.push(objective(points, &centers, &assign));
        }
    }
    let objective = *trace.last().expect("non-empty trace");
    ClusteringResult {
        k,
        objective,
        assignments: assign,
        centers,
        silhouette: None,
        medoids: None,
        feature_subset: (0..points.ncols()).collect(),
        trace,
        iterations,
    }
}
