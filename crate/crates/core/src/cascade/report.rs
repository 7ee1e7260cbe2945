use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tree::{CascadeTree, ClassRecord, LeafReason, Outcome, RemovedRow};
use crate::scores::CemMatrix;
use crate::Scalar;

/// What happened to one cluster of a searched node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct ClusterDecision<T> {
    pub cluster: usize,
    pub size: usize,
    pub removed: usize,
    pub max_cem: T,
    pub outcome: Outcome,
    pub reason: Option<LeafReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct NodeRecord<T> {
    pub node_id: usize,
    pub depth: usize,
    pub n_rows: usize,
    pub subsets_searched: usize,
    pub winning_subset: Vec<usize>,
    pub k: usize,
    pub cs_max: T,
    pub silhouette: Option<T>,
    pub cem: Option<CemMatrix<T>>,
    pub decisions: Vec<ClusterDecision<T>>,
}

/// A cluster that was searched but fell short of `lambda_cs` and so
/// became a single class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct CollapsedRecord<T> {
    pub parent_node: usize,
    pub cluster: usize,
    pub depth: usize,
    pub n_rows: usize,
    pub subsets_searched: usize,
    pub winning_subset: Vec<usize>,
    pub cs_max: T,
    pub class_id: usize,
}

/// Diagnostics of one fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct FitReport<T> {
    pub version: u32,
    pub nodes: Vec<NodeRecord<T>>,
    pub collapsed: Vec<CollapsedRecord<T>>,
    pub removals: Vec<RemovedRow<T>>,
    pub classes: Vec<ClassRecord>,
    pub label_names: Vec<String>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> FitReport<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Class-by-label table: one row per class with its tree position and
    /// how many training rows of each label it holds, followed by the
    /// removed-row counts.
    pub fn class_table(&self, tree: &CascadeTree<T>) -> String {
        let labels = &self.label_names;
        let width = labels.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = write!(out, "{:<6} {:<6} {:<10}", "class", "level", "position");
        for l in labels {
            let _ = write!(out, " {l:>width$}");
        }
        let _ = writeln!(out, " {:>6}  {}", "total", "label");
        let mut removed = vec![0u64; labels.len()];
        self.removals.iter().for_each(|r| removed[r.label] += 1);
        for class in &self.classes {
            let node = &tree.nodes[class.node_id];
            // collapsed clusters sit one level below the node that produced them
            let level = match class.reason {
                LeafReason::LowCompleteness if node.cem.is_some() => node.depth + 1,
                _ => node.depth,
            };
            let position = format!("n{}.c{}", class.node_id, class.cluster);
            let _ = write!(out, "{:<6} {:<6} {:<10}", class.class_id, level, position);
            for n in &class.composition {
                if *n == 0 {
                    let _ = write!(out, " {:>width$}", ".");
                } else {
                    let _ = write!(out, " {n:>width$}");
                }
            }
            let _ = writeln!(out, " {:>6}  {}", class.size(), labels[class.dominant_label]);
        }
        let _ = write!(out, "{:<6} {:<6} {:<10}", "noisy", "", "");
        for n in &removed {
            let _ = write!(out, " {n:>width$}");
        }
        let _ = writeln!(out, " {:>6}", self.removals.len());
        out
    }
}
