use ndarray::ArrayView2;

use crate::Scalar;

/// Point-to-point dissimilarity. Only Euclidean distance ships.
pub trait Metric {
    fn distance<T: Scalar>(a: &[T], b: &[T]) -> T;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    #[inline]
    fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
        sq_euclidean(a, b).sqrt()
    }
}

#[inline]
pub fn sq_euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

#[inline]
pub fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    Euclidean::distance(a, b)
}

/// Index and distance of the nearest row of `centers`; ties go to the lowest
/// index.
pub fn nearest_center<T: Scalar>(x: &[T], centers: ArrayView2<'_, T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (j, c) in centers.outer_iter().enumerate() {
        let d = sq_euclidean(x, c.as_slice().expect("centers are contiguous"));
        if d < best.1 {
            best = (j, d);
        }
    }
    (best.0, best.1.sqrt())
}

/// Dense symmetric matrix of pairwise distances.
#[derive(Clone, Debug)]
pub struct DistanceMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn new<M: Metric>(points: ArrayView2<'_, T>) -> Self {
        let points = points.as_standard_layout();
        let n = points.nrows();
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            let a = points.row(i);
            let a = a.as_slice().expect("standard layout");
            for j in (i + 1)..n {
                let b = points.row(j);
                let d = M::distance(a, b.as_slice().expect("standard layout"));
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        DistanceMatrix { n, data }
    }

    pub fn euclidean(points: ArrayView2<'_, T>) -> Self {
        Self::new::<Euclidean>(points)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}
