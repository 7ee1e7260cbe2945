use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::report::{ClusterDecision, CollapsedRecord, FitReport, NodeRecord};
use super::subsets::enumerate_ranked;
use super::tree::{CascadeNode, CascadeTree, ClassRecord, LeafReason, Outcome, RemovedRow};
use super::{Hyperparameters, MODEL_VERSION};
use crate::clustering::{best_k_clustering, euclidean, kmeans_fit, kmedoids_fit, Algorithm, ClusteringResult};
use crate::dataset::{apply_normalization, fit_normalization, Dataset};
use crate::rng::derive_seed;
use crate::scores::{cem, completeness_score, contingency};
use crate::{Error, Result, Scalar};

/// One feature subset's best clustering and its completeness.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetEvaluation<T> {
    /// Position in the full enumeration order.
    pub rank: u128,
    pub clustering: ClusteringResult<T>,
    pub completeness: T,
}

impl<T: Scalar> SubsetEvaluation<T> {
    pub fn subset(&self) -> &[usize] {
        &self.clustering.feature_subset
    }

    /// `Less` when `self` should win.
    fn rank_against(&self, other: &Self) -> Ordering {
        let sil = |e: &Self| e.clustering.silhouette.unwrap_or_else(T::neg_infinity);
        other
            .completeness
            .partial_cmp(&self.completeness)
            .unwrap_or(Ordering::Equal)
            .then(self.subset().len().cmp(&other.subset().len()))
            .then(sil(other).partial_cmp(&sil(self)).unwrap_or(Ordering::Equal))
            .then(self.rank.cmp(&other.rank))
    }
}

/// Clusters the node's rows on `subset` with `k_max` = number of distinct
/// labels, and scores the result by completeness. `None` when the rows hold
/// fewer than two distinct points on `subset`.
pub fn evaluate_subset<T: Scalar>(
    points: ArrayView2<'_, T>,
    labels: &[usize],
    subset: &[usize],
    hp: &Hyperparameters,
    seed: u64,
) -> Result<Option<(ClusteringResult<T>, T)>> {
    if points.nrows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: points.nrows(), actual: labels.len() });
    }
    if let Some(&f) = subset.iter().find(|&&f| f >= points.ncols()) {
        return Err(Error::invalid(format!("feature {f} outside 0..{}", points.ncols())));
    }
    let k_max = distinct(labels).len();
    if k_max < 2 {
        return Err(Error::invalid("subset evaluation needs at least two labels"));
    }
    let sub = points.select(Axis(1), subset);
    let first = sub.row(0);
    if sub.outer_iter().all(|r| r == first) {
        return Ok(None);
    }
    let mut clustering = best_k_clustering(sub.view(), k_max, hp.algorithm, seed, &hp.engine)?;
    clustering.feature_subset = subset.to_vec();
    let table = contingency(labels, &clustering.assignments)?;
    let cs = completeness_score(&table)?;
    Ok(Some((clustering, cs)))
}

/// Index of the winning evaluation: highest completeness, then fewer
/// features, then higher silhouette, then earlier in enumeration order.
pub fn select_best_subset<T: Scalar>(evaluations: &[SubsetEvaluation<T>]) -> Option<usize> {
    (0..evaluations.len()).min_by(|&a, &b| evaluations[a].rank_against(&evaluations[b]))
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l
}

struct Search<T> {
    /// `None` when every candidate subset was constant over the rows.
    best: Option<SubsetEvaluation<T>>,
    searched: usize,
}

struct Builder<'a, T> {
    hp: &'a Hyperparameters,
    features: &'a Array2<T>,
    labels: &'a [usize],
    row_ids: &'a [u64],
    n_labels: usize,
    nodes: Vec<Option<CascadeNode<T>>>,
    classes: Vec<ClassRecord>,
    node_records: Vec<NodeRecord<T>>,
    collapsed: Vec<CollapsedRecord<T>>,
    warnings: Vec<String>,
}

/// Fits the cascade on `train`. Features are normalized once, at the root.
pub fn fit<T: Scalar>(train: &Dataset<T>, hp: &Hyperparameters) -> Result<(CascadeTree<T>, FitReport<T>)> {
    hp.validate(Some(train.n_features()))?;
    if train.n_rows() < 3 {
        return Err(Error::invalid(format!("need at least 3 training rows, got {}", train.n_rows())));
    }
    let normalization = fit_normalization(train)?;
    let normalized = apply_normalization(train, &normalization)?;
    let mut b = Builder {
        hp,
        features: normalized.features(),
        labels: normalized.labels(),
        row_ids: normalized.row_ids(),
        n_labels: train.n_labels(),
        nodes: Vec::new(),
        classes: Vec::new(),
        node_records: Vec::new(),
        collapsed: Vec::new(),
        warnings: Vec::new(),
    };
    let rows: Vec<usize> = (0..train.n_rows()).collect();
    if train.distinct_labels() < 2 {
        let msg = "training data has a single label; the tree is one class".to_string();
        log::warn!("{msg}");
        b.warnings.push(msg);
        b.trivial_root(&rows, None, LeafReason::SingleLabel)?;
    } else {
        b.grow(rows, 0, derive_seed(hp.seed, &[0]), None)?;
    }
    let nodes = b
        .nodes
        .into_iter()
        .map(|n| n.ok_or_else(|| Error::invariant("node slot left empty")))
        .collect::<Result<Vec<_>>>()?;
    let removed: Vec<RemovedRow<T>> = nodes.iter().flat_map(|n| n.removed_rows.iter().cloned()).collect();
    let tree = CascadeTree {
        normalization,
        hyperparameters: hp.clone(),
        nodes,
        classes: b.classes,
        removed,
        label_names: train.label_names().to_vec(),
        feature_names: train.feature_names().to_vec(),
    };
    tree.validate()?;
    if tree.n_accounted() != train.n_rows() {
        return Err(Error::invariant(format!(
            "{} of {} training rows accounted for",
            tree.n_accounted(),
            train.n_rows()
        )));
    }
    let report = FitReport {
        version: MODEL_VERSION,
        nodes: b.node_records,
        collapsed: b.collapsed,
        removals: tree.removed.clone(),
        classes: tree.classes.clone(),
        label_names: tree.label_names.clone(),
        warnings: b.warnings,
    };
    Ok((tree, report))
}

impl<T: Scalar> Builder<'_, T> {
    fn labels_of(&self, rows: &[usize]) -> Vec<usize> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }

    fn search(&self, rows: &[usize], seed: u64) -> Result<Search<T>> {
        let points = self.features.select(Axis(0), rows);
        let labels = self.labels_of(rows);
        let policy = self.hp.subset_policy(self.features.ncols());
        let candidates = enumerate_ranked(self.features.ncols(), &policy, seed)?;
        let evaluations = candidates
            .par_iter()
            .map(|c| {
                let s = derive_seed(seed, &[(c.rank >> 64) as u64, c.rank as u64]);
                evaluate_subset(points.view(), &labels, &c.features, self.hp, s).map(|r| {
                    r.map(|(clustering, completeness)| SubsetEvaluation { rank: c.rank, clustering, completeness })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let searched = evaluations.len();
        let mut evaluations: Vec<_> = evaluations.into_iter().flatten().collect();
        let best = select_best_subset(&evaluations).map(|i| evaluations.swap_remove(i));
        Ok(Search { best, searched })
    }

    fn new_class(&mut self, node_id: usize, cluster: usize, members: &[usize], fallback: &[usize], reason: LeafReason) -> usize {
        let mut composition = vec![0u64; self.n_labels];
        members.iter().for_each(|&r| composition[self.labels[r]] += 1);
        let mut basis = composition.clone();
        if members.is_empty() {
            fallback.iter().for_each(|&r| basis[self.labels[r]] += 1);
        }
        // most frequent label, lowest code on ties
        let dominant = (0..self.n_labels).fold(0, |best, l| if basis[l] > basis[best] { l } else { best });
        let class_id = self.classes.len();
        self.classes.push(ClassRecord {
            class_id,
            node_id,
            cluster,
            composition,
            dominant_label: dominant,
            members: members.iter().map(|&r| self.row_ids[r]).collect(),
            reason,
        });
        class_id
    }

    /// Radius of every cluster: the largest member-to-center distance.
    fn radii(&self, rows: &[usize], subset: &[usize], fit: &ClusteringResult<T>) -> Vec<T> {
        let mut radii = vec![T::zero(); fit.k];
        let mut x = vec![T::zero(); subset.len()];
        for (&r, &a) in rows.iter().zip(&fit.assignments) {
            for (v, &f) in x.iter_mut().zip(subset) {
                *v = self.features[[r, f]];
            }
            let c = fit.centers.row(a);
            let d = euclidean(&x, c.as_slice().expect("standard layout"));
            if d > radii[a] {
                radii[a] = d;
            }
        }
        radii
    }

    /// A root that cannot be split: one cluster over `subset` (all features
    /// when `None`) holding every row.
    fn trivial_root(&mut self, rows: &[usize], search: Option<Search<T>>, reason: LeafReason) -> Result<Outcome> {
        let subset: Vec<usize> = match search.as_ref().and_then(|s| s.best.as_ref()) {
            Some(b) => b.subset().to_vec(),
            None => (0..self.features.ncols()).collect(),
        };
        let points = self.features.select(Axis(0), rows).select(Axis(1), &subset);
        let mut one = match self.hp.algorithm {
            Algorithm::KMeans => kmeans_fit(points.view(), 1, self.hp.seed, &self.hp.engine.kmeans)?,
            Algorithm::KMedoids => kmedoids_fit(points.view(), 1, &self.hp.engine.kmedoids)?,
        };
        one.feature_subset = subset.clone();
        let radii = self.radii(rows, &subset, &one);
        let labels_present = distinct(&self.labels_of(rows));
        let completeness = match &search {
            Some(s) => s.best.as_ref().map_or(T::zero(), |b| b.completeness),
            None => T::one(),
        };
        let class_id = self.new_class(0, 0, rows, rows, reason);
        self.nodes.push(Some(CascadeNode {
            node_id: 0,
            depth: 0,
            n_rows: rows.len(),
            labels_present,
            feature_subset: subset.clone(),
            k: 1,
            centers: one.centers,
            radii,
            completeness,
            silhouette: None,
            cem: None,
            children: vec![Outcome::Leaf { class_id }],
            removed_rows: Vec::new(),
        }));
        self.node_records.push(NodeRecord {
            node_id: 0,
            depth: 0,
            n_rows: rows.len(),
            subsets_searched: search.as_ref().map_or(0, |s| s.searched),
            winning_subset: subset,
            k: 1,
            cs_max: completeness,
            silhouette: None,
            cem: None,
            decisions: vec![ClusterDecision {
                cluster: 0,
                size: rows.len(),
                removed: 0,
                max_cem: T::zero(),
                outcome: Outcome::Leaf { class_id },
                reason: Some(reason),
            }],
        });
        Ok(Outcome::Leaf { class_id })
    }

    /// Searches `rows` and either splits them into a node or, when no subset
    /// reaches `lambda_cs`, returns them as one class under `parent`.
    fn grow(&mut self, rows: Vec<usize>, depth: usize, seed: u64, parent: Option<(usize, usize)>) -> Result<Outcome> {
        let search = self.search(&rows, seed)?;
        let cs = search.best.as_ref().map_or(T::zero(), |b| b.completeness);
        log::debug!(
            "depth {depth}: {} rows, {} subsets, best {:?} k={:?} cs={cs}",
            rows.len(),
            search.searched,
            search.best.as_ref().map(SubsetEvaluation::subset),
            search.best.as_ref().map(|b| b.clustering.k)
        );
        if search.best.is_none() || cs.as_f64() < self.hp.lambda_cs {
            let Some((parent_node, cluster)) = parent else {
                return self.trivial_root(&rows, Some(search), LeafReason::LowCompleteness);
            };
            let class_id = self.new_class(parent_node, cluster, &rows, &rows, LeafReason::LowCompleteness);
            self.collapsed.push(CollapsedRecord {
                parent_node,
                cluster,
                depth,
                n_rows: rows.len(),
                subsets_searched: search.searched,
                winning_subset: search.best.as_ref().map_or_else(Vec::new, |b| b.subset().to_vec()),
                cs_max: cs,
                class_id,
            });
            return Ok(Outcome::Leaf { class_id });
        }

        let node_id = self.nodes.len();
        self.nodes.push(None);
        let Search { best, searched } = search;
        let best = best.expect("checked above");
        let fit = best.clustering;
        let k = fit.k;
        let labels = self.labels_of(&rows);
        let table = contingency(&labels, &fit.assignments)?;
        if table.cluster_ids != (0..k).collect::<Vec<_>>() {
            return Err(Error::invariant(format!("node {node_id}: clustering left an empty cluster")));
        }
        let matrix = cem::<T>(&table)?;
        let radii = self.radii(&rows, &fit.feature_subset, &fit);

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (&r, &a) in rows.iter().zip(&fit.assignments) {
            members[a].push(r);
        }
        let mut removed_rows = Vec::new();
        let mut children = Vec::with_capacity(k);
        let mut decisions = Vec::with_capacity(k);
        for (j, cluster_rows) in members.iter().enumerate() {
            let mut kept = Vec::with_capacity(cluster_rows.len());
            let mut n_removed = 0;
            for &r in cluster_rows {
                let label = self.labels[r];
                let entry = matrix.entry(j, label).expect("label and cluster tabulated");
                if entry.as_f64() < self.hp.lambda_ol {
                    removed_rows.push(RemovedRow { row_id: self.row_ids[r], label, node_id, cluster: j, cem: entry });
                    n_removed += 1;
                } else {
                    kept.push(r);
                }
            }
            let max_cem = matrix.cluster_max(j);
            let kept_labels = distinct(&self.labels_of(&kept));
            let leaf_reason = if kept.is_empty() {
                Some(LeafReason::EmptyAfterRemoval)
            } else if max_cem.as_f64() >= self.hp.lambda_cem {
                Some(LeafReason::CemThreshold)
            } else if kept.len() < self.hp.min_node_rows {
                Some(LeafReason::TooFewRows)
            } else if kept_labels.len() < 2 {
                Some(LeafReason::SingleLabel)
            } else if depth + 1 > self.hp.max_depth {
                Some(LeafReason::MaxDepth)
            } else {
                None
            };
            let outcome = match leaf_reason {
                Some(reason) => Outcome::Leaf { class_id: self.new_class(node_id, j, &kept, cluster_rows, reason) },
                None => {
                    debug_assert!(kept.len() < rows.len());
                    self.grow(kept, depth + 1, derive_seed(seed, &[j as u64]), Some((node_id, j)))?
                }
            };
            // a collapsed child is reported as a leaf of this node
            let reason = match outcome {
                Outcome::Leaf { .. } => leaf_reason.or(Some(LeafReason::LowCompleteness)),
                Outcome::Subtree { .. } => None,
            };
            children.push(outcome);
            decisions.push(ClusterDecision { cluster: j, size: cluster_rows.len(), removed: n_removed, max_cem, outcome, reason });
        }
        let silhouette = fit.silhouette;
        self.node_records.push(NodeRecord {
            node_id,
            depth,
            n_rows: rows.len(),
            subsets_searched: searched,
            winning_subset: fit.feature_subset.clone(),
            k,
            cs_max: best.completeness,
            silhouette,
            cem: Some(matrix.clone()),
            decisions,
        });
        self.nodes[node_id] = Some(CascadeNode {
            node_id,
            depth,
            n_rows: rows.len(),
            labels_present: distinct(&labels),
            feature_subset: fit.feature_subset,
            k,
            centers: fit.centers,
            radii,
            completeness: best.completeness,
            silhouette,
            cem: Some(matrix),
            children,
            removed_rows,
        });
        Ok(Outcome::Subtree { node_id })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn eval(rank: u128, cs: f64, size: usize, sil: f64) -> SubsetEvaluation<f64> {
        SubsetEvaluation {
            rank,
            completeness: cs,
            clustering: ClusteringResult {
                assignments: vec![],
                centers: Array2::zeros((0, size)),
                k: 2,
                objective: 0.0,
                silhouette: Some(sil),
                feature_subset: (0..size).collect(),
                medoids: None,
                trace: vec![],
                iterations: 0,
            },
        }
    }

    #[test]
    fn selection_tie_rules() {
        let e = [eval(0, 0.7, 2, 0.5), eval(1, 0.9, 4, 0.5), eval(2, 0.9, 2, 0.5)];
        assert_eq!(select_best_subset(&e), Some(2));
        assert_eq!(select_best_subset(&e[..1]), Some(0));
        let same = [eval(0, 0.8, 3, 0.5), eval(1, 0.8, 3, 0.5), eval(2, 0.8, 3, 0.5)];
        assert_eq!(select_best_subset(&same), Some(0));
        let sil = [eval(0, 0.8, 3, 0.4), eval(1, 0.8, 3, 0.6)];
        assert_eq!(select_best_subset(&sil), Some(1));
        assert_eq!(select_best_subset::<f64>(&[]), None);
    }

    #[test]
    fn k_max_follows_label_count() {
        // three clear groups but only two labels: k stays at 2
        let x = array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0], [10.0, 0.0], [10.1, 0.0]];
        let labels = [0, 0, 1, 1, 1, 1];
        let (c, cs) = evaluate_subset(x.view(), &labels, &[0, 1], &Hyperparameters::default(), 0).unwrap().unwrap();
        assert_eq!(c.k, 2);
        assert!(cs > 0.0);
    }

    #[test]
    fn separated_blobs_have_full_completeness() {
        let x = array![[0.0, 0.0], [0.1, 0.2], [0.2, 0.1], [9.0, 9.0], [9.1, 9.2], [9.2, 9.1]];
        let labels = [0, 0, 0, 1, 1, 1];
        let (_, cs) = evaluate_subset(x.view(), &labels, &[0, 1], &Hyperparameters::default(), 0).unwrap().unwrap();
        assert_eq!(cs, 1.0);
    }

    #[test]
    fn constant_subsets_are_skipped() {
        let x = array![[0.0, 1.0], [0.0, 2.0], [0.0, 3.0], [0.0, 4.0]];
        let labels = [0, 0, 1, 1];
        let hp = Hyperparameters::default();
        assert!(evaluate_subset(x.view(), &labels, &[0], &hp, 0).unwrap().is_none());
        assert!(evaluate_subset(x.view(), &labels, &[0, 1], &hp, 0).unwrap().is_some());
    }
}
