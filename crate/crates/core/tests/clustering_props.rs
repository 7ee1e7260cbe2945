use ndarray::Array2;
use proptest::prelude::*;
use sscc::clustering::{
    best_k_clustering, kmeans_fit, kmedoids_fit, nearest_center, silhouette_score, sq_euclidean, Algorithm,
    EngineConfig, KMeansConfig, KMedoidsConfig,
};

fn points(max_rows: usize, max_dim: usize) -> impl Strategy<Value = Array2<f64>> {
    (4usize..=max_rows, 1usize..=max_dim).prop_flat_map(|(n, d)| {
        prop::collection::vec(-50.0f64..50.0, n * d).prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
    })
}

fn rotate(x: &Array2<f64>, theta: f64, shift: (f64, f64)) -> Array2<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    let mut y = x.clone();
    for mut r in y.outer_iter_mut() {
        let (a, b) = (r[0], r[1]);
        r[0] = c * a - s * b + shift.0;
        r[1] = s * a + c * b + shift.1;
    }
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn kmeans_objective_never_increases(x in points(40, 4), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(x.nrows());
        let r = kmeans_fit(x.view(), k, seed, &KMeansConfig::default()).unwrap();
        for w in r.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        prop_assert_eq!(r.assignments.len(), x.nrows());
        prop_assert!(r.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn silhouette_survives_rotation(x in points(30, 2).prop_filter("2-d", |x| x.ncols() == 2),
                                    theta in 0.0f64..6.283, dx in -100.0f64..100.0, dy in -100.0f64..100.0) {
        let n = x.nrows();
        let assign: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let a = silhouette_score(x.view(), &assign).unwrap();
        let b = silhouette_score(rotate(&x, theta, (dx, dy)).view(), &assign).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        prop_assert!((-1.0..=1.0).contains(&a));
    }

    #[test]
    fn nearest_center_is_nearest(x in prop::collection::vec(-10.0f64..10.0, 3), c in points(8, 3).prop_filter("3-d", |c| c.ncols() == 3)) {
        let (j, d) = nearest_center(&x, c.view());
        for (i, row) in c.outer_iter().enumerate() {
            let di = sq_euclidean(&x, row.as_slice().unwrap()).sqrt();
            prop_assert!(d <= di);
            if di == d {
                prop_assert!(j <= i);
                break;
            }
        }
    }

    #[test]
    fn kmedoids_medoids_are_members(x in points(25, 3), k in 1usize..4) {
        let k = k.min(x.nrows());
        let r = kmedoids_fit(x.view(), k, &KMedoidsConfig::default()).unwrap();
        let meds = r.medoids.clone().unwrap();
        for (slot, &m) in meds.iter().enumerate() {
            prop_assert_eq!(r.assignments[m], slot);
            prop_assert_eq!(r.centers.row(slot), x.row(m));
        }
        for w in r.trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn best_k_stays_in_range(x in points(20, 3), k_max in 2usize..6, seed in any::<u64>()) {
        for algo in [Algorithm::KMeans, Algorithm::KMedoids] {
            let r = best_k_clustering(x.view(), k_max, algo, seed, &EngineConfig::default()).unwrap();
            prop_assert!(r.k >= 2 && r.k <= k_max.min(x.nrows() - 1));
            prop_assert!(r.silhouette.is_some());
        }
    }
}

#[test]
fn kmeans_is_deterministic_per_seed() {
    let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
    let a = kmeans_fit(x.view(), 3, 5, &KMeansConfig::default()).unwrap();
    let b = kmeans_fit(x.view(), 3, 5, &KMeansConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn f32_and_f64_agree_on_separated_data() {
    let x64 = ndarray::array![[0.0, 0.0], [0.2, 0.1], [0.1, 0.3], [8.0, 8.0], [8.2, 8.1], [7.9, 8.3]];
    let x32 = x64.mapv(|v| v as f32);
    let a = kmeans_fit(x64.view(), 2, 1, &KMeansConfig::default()).unwrap();
    let b = kmeans_fit(x32.view(), 2, 1, &KMeansConfig::default()).unwrap();
    assert_eq!(a.assignments, b.assignments);
    assert!((a.objective - b.objective as f64).abs() < 1e-4);
}
