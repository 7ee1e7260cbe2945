//! Tree-traversal classification: a row descends the cascade by nearest
//! center until it reaches a class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeTree, Outcome};
use crate::clustering::euclidean;
use crate::{Error, Result, Scalar};

/// Optional rule that flags rows far from every center they pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoveltyPolicy {
    pub enabled: bool,
    /// A row is novel when its distance to the chosen center exceeds this
    /// multiple of the cluster's training radius.
    pub radius_multiplier: f64,
}

impl Default for NoveltyPolicy {
    fn default() -> Self {
        NoveltyPolicy { enabled: false, radius_multiplier: 3.0 }
    }
}

impl NoveltyPolicy {
    pub fn enabled(radius_multiplier: f64) -> Self {
        NoveltyPolicy { enabled: true, radius_multiplier }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Hop<T> {
    pub node_id: usize,
    pub cluster: usize,
    pub distance: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct Classification<T> {
    /// `None` when the row was flagged novel.
    pub class_id: Option<usize>,
    pub path: Vec<Hop<T>>,
    /// Distance to every center of every visited node.
    pub distances: Vec<Vec<T>>,
    /// Node at which the novelty rule fired.
    pub novelty: Option<usize>,
}

impl<T> Classification<T> {
    pub fn is_novel(&self) -> bool {
        self.novelty.is_some()
    }

    /// Node holding the final hop.
    pub fn last_node(&self) -> usize {
        self.path.last().map_or(0, |h| h.node_id)
    }
}

pub fn classify<T: Scalar>(x: &[T], tree: &CascadeTree<T>, policy: &NoveltyPolicy) -> Result<Classification<T>> {
    if let Some(feature) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { feature });
    }
    let z = tree.normalization.normalize_row(x)?;
    let mut node_id = CascadeTree::<T>::ROOT;
    let mut path = Vec::new();
    let mut distances = Vec::new();
    // nodes are numbered in preorder, so every step strictly increases the id
    loop {
        let node = &tree.nodes[node_id];
        let sub: Vec<T> = node.feature_subset.iter().map(|&f| z[f]).collect();
        let d: Vec<T> = node
            .centers
            .outer_iter()
            .map(|c| euclidean(&sub, c.as_slice().expect("standard layout")))
            .collect();
        let cluster = (0..d.len()).fold(0, |best, j| if d[j] < d[best] { j } else { best });
        let dist = d[cluster];
        path.push(Hop { node_id, cluster, distance: dist });
        distances.push(d);
        if policy.enabled && dist > T::of(policy.radius_multiplier) * node.radii[cluster] {
            return Ok(Classification { class_id: None, path, distances, novelty: Some(node_id) });
        }
        match node.children[cluster] {
            Outcome::Leaf { class_id } => {
                return Ok(Classification { class_id: Some(class_id), path, distances, novelty: None });
            }
            Outcome::Subtree { node_id: next } => node_id = next,
        }
    }
}

/// Per-row results in input order.
#[derive(Debug)]
pub struct BatchClassification<T> {
    pub results: Vec<Result<Classification<T>>>,
    pub novel: usize,
    pub errors: usize,
}

pub fn classify_batch<T: Scalar, R: AsRef<[T]> + Sync>(
    rows: &[R],
    tree: &CascadeTree<T>,
    policy: &NoveltyPolicy,
) -> BatchClassification<T> {
    let results: Vec<Result<Classification<T>>> =
        rows.par_iter().map(|r| classify(r.as_ref(), tree, policy)).collect();
    let novel = results.iter().filter(|r| r.as_ref().is_ok_and(Classification::is_novel)).count();
    let errors = results.iter().filter(|r| r.is_err()).count();
    BatchClassification { results, novel, errors }
}

/// Accuracy of predicted classes against true label codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub correct: usize,
    /// Denominator of `accuracy`.
    pub counted: usize,
    pub novel: usize,
    pub errors: usize,
    /// `confusion[class][true label]`.
    pub confusion: Vec<Vec<u64>>,
}

/// A row is correct when its class's dominant label equals its true label.
/// Novel rows and failed rows count as wrong unless `exclude_novel` drops
/// novel rows from the denominator.
pub fn evaluate_accuracy<T: Scalar>(
    predictions: &[Result<Classification<T>>],
    truth: &[usize],
    tree: &CascadeTree<T>,
    exclude_novel: bool,
) -> Result<AccuracyReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: predictions.len() });
    }
    let n_labels = tree.label_names.len();
    let mut confusion = vec![vec![0u64; n_labels]; tree.classes.len()];
    let (mut correct, mut counted, mut novel, mut errors) = (0, 0, 0, 0);
    for (p, &t) in predictions.iter().zip(truth) {
        match p {
            Err(_) => {
                errors += 1;
                counted += 1;
            }
            Ok(c) => match c.class_id {
                None => {
                    novel += 1;
                    if !exclude_novel {
                        counted += 1;
                    }
                }
                Some(class) => {
                    counted += 1;
                    let record = tree.class(class).ok_or_else(|| Error::invalid(format!("unknown class {class}")))?;
                    if t < n_labels {
                        confusion[class][t] += 1;
                    }
                    if record.dominant_label == t {
                        correct += 1;
                    }
                }
            },
        }
    }
    let accuracy = if counted == 0 { 0.0 } else { correct as f64 / counted as f64 };
    Ok(AccuracyReport { accuracy, correct, counted, novel, errors, confusion })
}
