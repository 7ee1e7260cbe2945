use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Hyperparameters;
use crate::dataset::NormalizationParams;
use crate::scores::CemMatrix;
use crate::{Error, Result, Scalar};

/// What became of one cluster of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Leaf { class_id: usize },
    Subtree { node_id: usize },
}

/// Why a set of rows ended up as a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafReason {
    /// Some CEM entry of the cluster reached `lambda_cem`.
    CemThreshold,
    /// The rows were searched but no subset reached `lambda_cs`.
    LowCompleteness,
    TooFewRows,
    SingleLabel,
    MaxDepth,
    /// Every row of the cluster was removed as noisy.
    EmptyAfterRemoval,
}

impl LeafReason {
    pub fn as_str(self) -> &'static str {
        match self {
            LeafReason::CemThreshold => "cem",
            LeafReason::LowCompleteness => "low completeness",
            LeafReason::TooFewRows => "too few rows",
            LeafReason::SingleLabel => "single label",
            LeafReason::MaxDepth => "max depth",
            LeafReason::EmptyAfterRemoval => "emptied by removal",
        }
    }
}

/// A training row judged noisy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct RemovedRow<T> {
    pub row_id: u64,
    pub label: usize,
    pub node_id: usize,
    pub cluster: usize,
    /// CEM entry of the (cluster, label) cell, below `lambda_ol`.
    pub cem: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CascadeNode<T> {
    pub node_id: usize,
    /// Cascade level; the root is 0.
    pub depth: usize,
    pub n_rows: usize,
    /// Distinct label codes among the node's rows.
    pub labels_present: Vec<usize>,
    pub feature_subset: Vec<usize>,
    pub k: usize,
    /// Normalized-space centers over `feature_subset`, one row per cluster.
    #[serde(with = "crate::serde_rows")]
    pub centers: Array2<T>,
    /// Largest distance from a training member to its center.
    pub radii: Vec<T>,
    pub completeness: T,
    pub silhouette: Option<T>,
    /// Absent on a root that could not be split.
    pub cem: Option<CemMatrix<T>>,
    pub children: Vec<Outcome>,
    pub removed_rows: Vec<RemovedRow<T>>,
}

/// A leaf of the cascade.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub class_id: usize,
    pub node_id: usize,
    pub cluster: usize,
    /// Member count per original label code.
    pub composition: Vec<u64>,
    pub dominant_label: usize,
    /// Training row ids that ended in this class.
    pub members: Vec<u64>,
    pub reason: LeafReason,
}

impl ClassRecord {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// A fitted cascade. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CascadeTree<T> {
    pub normalization: NormalizationParams<T>,
    pub hyperparameters: Hyperparameters,
    pub nodes: Vec<CascadeNode<T>>,
    pub classes: Vec<ClassRecord>,
    pub removed: Vec<RemovedRow<T>>,
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
}

impl<T: Scalar> CascadeTree<T> {
    pub const ROOT: usize = 0;

    pub fn root(&self) -> &CascadeNode<T> {
        &self.nodes[Self::ROOT]
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn class(&self, class_id: usize) -> Option<&ClassRecord> {
        self.classes.get(class_id)
    }

    /// Name of the class's dominant label.
    pub fn class_label(&self, class_id: usize) -> Option<&str> {
        self.classes
            .get(class_id)
            .and_then(|c| self.label_names.get(c.dominant_label))
            .map(String::as_str)
    }

    pub fn removed_row_ids(&self) -> HashSet<u64> {
        self.removed.iter().map(|r| r.row_id).collect()
    }

    /// Class of every training row that was kept.
    pub fn class_of_row(&self) -> HashMap<u64, usize> {
        self.classes
            .iter()
            .flat_map(|c| c.members.iter().map(move |&id| (id, c.class_id)))
            .collect()
    }

    /// Number of training rows the tree accounts for.
    pub fn n_accounted(&self) -> usize {
        self.classes.iter().map(ClassRecord::size).sum::<usize>() + self.removed.len()
    }

    /// Checks every structural invariant of a fitted tree.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Invariant(msg));
        self.hyperparameters.validate(Some(self.n_features()))?;
        self.normalization.validate()?;
        if self.normalization.n_features() != self.n_features() {
            return bad(format!(
                "normalization covers {} features, model has {}",
                self.normalization.n_features(),
                self.n_features()
            ));
        }
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let n_labels = self.label_names.len();
        let hp = &self.hyperparameters;
        let mut parent_of: Vec<Option<usize>> = vec![None; self.nodes.len()];
        let mut class_seen: Vec<Option<(usize, usize)>> = vec![None; self.classes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.node_id != i {
                return bad(format!("node at position {i} has id {}", node.node_id));
            }
            if node.children.len() != node.k {
                return bad(format!("node {i}: {} children for k = {}", node.children.len(), node.k));
            }
            if node.k == 0 || node.centers.nrows() != node.k || node.radii.len() != node.k {
                return bad(format!("node {i}: centers/radii do not match k = {}", node.k));
            }
            if node.k > node.labels_present.len().max(1) {
                return bad(format!("node {i}: k = {} exceeds {} labels", node.k, node.labels_present.len()));
            }
            if node.labels_present.iter().any(|&l| l >= n_labels) {
                return bad(format!("node {i}: unknown label code"));
            }
            if node.depth > hp.max_depth {
                return bad(format!("node {i}: depth {} exceeds max_depth {}", node.depth, hp.max_depth));
            }
            let subset = &node.feature_subset;
            if subset.is_empty()
                || subset.windows(2).any(|w| w[0] >= w[1])
                || subset.iter().any(|&f| f >= self.n_features())
            {
                return bad(format!("node {i}: bad feature subset {subset:?}"));
            }
            if node.centers.ncols() != subset.len() {
                return bad(format!("node {i}: centers have {} columns for {} features", node.centers.ncols(), subset.len()));
            }
            if node.centers.iter().any(|v| !v.is_finite()) {
                return bad(format!("node {i}: non-finite center"));
            }
            if node.radii.iter().any(|r| !(r.is_finite() && *r >= T::zero())) {
                return bad(format!("node {i}: radii must be finite and non-negative"));
            }
            if let Some(cem) = &node.cem {
                if cem.n_clusters() != node.k || cem.values.iter().any(|r| r.len() != cem.n_labels()) {
                    return bad(format!("node {i}: CEM shape does not match k"));
                }
            }
            for r in &node.removed_rows {
                if r.node_id != i || r.cluster >= node.k || r.label >= n_labels {
                    return bad(format!("node {i}: malformed removed row {}", r.row_id));
                }
                if r.cem.as_f64() >= hp.lambda_ol {
                    return bad(format!("node {i}: row {} removed with CEM {} >= lambda_ol", r.row_id, r.cem));
                }
            }
            for (j, child) in node.children.iter().enumerate() {
                match *child {
                    Outcome::Subtree { node_id } => {
                        if node_id <= i || node_id >= self.nodes.len() {
                            return bad(format!("node {i}: child pointer {node_id} out of order"));
                        }
                        if parent_of[node_id].replace(i).is_some() {
                            return bad(format!("node {node_id} has two parents"));
                        }
                        if self.nodes[node_id].depth != node.depth + 1 {
                            return bad(format!("node {node_id}: depth does not follow its parent"));
                        }
                    }
                    Outcome::Leaf { class_id } => {
                        let Some(slot) = class_seen.get_mut(class_id) else {
                            return bad(format!("node {i}: unknown class {class_id}"));
                        };
                        if slot.replace((i, j)).is_some() {
                            return bad(format!("class {class_id} is reached twice"));
                        }
                    }
                }
            }
        }
        if self.nodes[0].depth != 0 {
            return bad("root depth must be 0".into());
        }
        if let Some(orphan) = (1..self.nodes.len()).find(|&i| parent_of[i].is_none()) {
            return bad(format!("node {orphan} is unreachable"));
        }
        let mut order = Vec::with_capacity(self.classes.len());
        self.leaves_preorder(0, &mut order);
        if order != (0..self.classes.len()).collect::<Vec<_>>() {
            return bad("classes are not numbered in depth-first order".into());
        }
        let mut rows = HashSet::new();
        for (c, class) in self.classes.iter().enumerate() {
            if class.class_id != c {
                return bad(format!("class at position {c} has id {}", class.class_id));
            }
            if class_seen[c] != Some((class.node_id, class.cluster)) {
                return bad(format!("class {c} does not match its leaf"));
            }
            if class.composition.len() != n_labels || class.dominant_label >= n_labels {
                return bad(format!("class {c}: composition does not cover the labels"));
            }
            let total: u64 = class.composition.iter().sum();
            if total != class.members.len() as u64 {
                return bad(format!("class {c}: composition sums to {total}, {} members", class.members.len()));
            }
            if let Some(&dup) = class.members.iter().find(|&&id| !rows.insert(id)) {
                return bad(format!("row {dup} is accounted for twice"));
            }
        }
        let from_nodes: Vec<&RemovedRow<T>> = self.nodes.iter().flat_map(|n| &n.removed_rows).collect();
        if from_nodes.len() != self.removed.len() || from_nodes.iter().zip(&self.removed).any(|(a, b)| *a != b) {
            return bad("removed rows disagree with the per-node lists".into());
        }
        if let Some(dup) = self.removed.iter().find(|r| !rows.insert(r.row_id)) {
            return bad(format!("row {} is accounted for twice", dup.row_id));
        }
        Ok(())
    }

    fn leaves_preorder(&self, node: usize, out: &mut Vec<usize>) {
        for child in &self.nodes[node].children {
            match *child {
                Outcome::Leaf { class_id } => out.push(class_id),
                Outcome::Subtree { node_id } => self.leaves_preorder(node_id, out),
            }
        }
    }
}
