use ndarray::ArrayView2;

use super::distance::DistanceMatrix;
use crate::{Error, Result, Scalar};

/// Mean silhouette width of a hard clustering under Euclidean distance.
///
/// A point alone in its cluster contributes 0.
pub fn silhouette_score<T: Scalar>(points: ArrayView2<'_, T>, assignments: &[usize]) -> Result<T> {
    if points.nrows() != assignments.len() {
        return Err(Error::DimensionMismatch { expected: points.nrows(), actual: assignments.len() });
    }
    silhouette_from_distances(&DistanceMatrix::euclidean(points), assignments)
}

pub fn silhouette_from_distances<T: Scalar>(dm: &DistanceMatrix<T>, assignments: &[usize]) -> Result<T> {
    let n = dm.len();
    if assignments.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: assignments.len() });
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::invalid("silhouette needs at least two clusters"));
    }
    let mut sizes = vec![0usize; k];
    assignments.iter().for_each(|&a| sizes[a] += 1);
    if sizes.contains(&0) {
        return Err(Error::invalid("silhouette needs every cluster to be non-empty"));
    }
    if n < k + 1 {
        return Err(Error::invalid(format!("silhouette needs more than {k} points for {k} clusters")));
    }

    let mut total = T::zero();
    let mut sums = vec![T::zero(); k];
    for i in 0..n {
        let own = assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = T::zero());
        for (j, &d) in dm.row(i).iter().enumerate() {
            sums[assignments[j]] += d;
        }
        let a = sums[own] / T::of_usize(sizes[own] - 1);
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / T::of_usize(sizes[c]))
            .fold(T::infinity(), T::min);
        let m = a.max(b);
        if m > T::zero() {
            total += (b - a) / m;
        }
    }
    Ok(total / T::of_usize(n))
}
