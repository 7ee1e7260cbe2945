#![allow(dead_code)]

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sscc::cascade::Hyperparameters;
use sscc::Dataset64;

/// Two square blobs of `per_blob` rows in `dims` dimensions, centred at 0 and
/// at `gap` on every axis, labels 0 and 1.
pub fn two_blobs(per_blob: usize, dims: usize, gap: f64, seed: u64) -> Dataset64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * per_blob;
    let x = Array2::from_shape_fn((n, dims), |(i, _)| {
        let base = if i < per_blob { 0.0 } else { gap };
        base + rng.gen_range(-1.0..1.0)
    });
    let labels = (0..n).map(|i| usize::from(i >= per_blob)).collect();
    Dataset64::from_parts(x, labels).unwrap()
}

/// Flips `per_blob_flips` labels inside each blob. Returns the noisy data and
/// the flipped row ids.
pub fn flip_per_blob(data: &Dataset64, per_blob: usize, per_blob_flips: usize, seed: u64) -> (Dataset64, Vec<u64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = data.labels().to_vec();
    let mut flipped = Vec::new();
    for blob in 0..2 {
        let mut idx: Vec<usize> = (blob * per_blob..(blob + 1) * per_blob).collect();
        idx.shuffle(&mut rng);
        for &i in &idx[..per_blob_flips] {
            labels[i] = 1 - labels[i];
            flipped.push(data.row_ids()[i]);
        }
    }
    flipped.sort_unstable();
    (data.with_labels(labels).unwrap(), flipped)
}

/// Thresholds for the noisy two-blob case: a 45/5 split scores about 0.68.
pub fn noisy_blob_hp(seed: u64) -> Hyperparameters {
    Hyperparameters { lambda_cs: 0.5, lambda_cem: 0.85, lambda_ol: 0.05, seed, ..Hyperparameters::default() }
}
