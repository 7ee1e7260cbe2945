//! The cascade: per-node feature-subset search, completeness-driven choice of
//! the clustering, CEM-driven noise removal, class designation and recursion.

mod fit;
mod model;
mod report;
mod subsets;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{Algorithm, EngineConfig};
use crate::{Error, Result};

pub use fit::{evaluate_subset, fit, select_best_subset, SubsetEvaluation};
pub use model::{load_model, model_from_json, model_to_json, save_model, MODEL_VERSION};
pub use report::{ClusterDecision, CollapsedRecord, FitReport, NodeRecord};
pub use subsets::{enumerate_feature_subsets, enumerate_ranked, subset_count, RankedSubset, SubsetPolicy};
pub use tree::{CascadeNode, CascadeTree, ClassRecord, LeafReason, Outcome, RemovedRow};

/// Thresholds and search settings for one fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// A cluster with some CEM entry at or above this becomes a class.
    pub lambda_cem: f64,
    /// A node whose best completeness is below this becomes one class.
    pub lambda_cs: f64,
    /// Rows in CEM cells below this are removed as noisy.
    pub lambda_ol: f64,
    pub algorithm: Algorithm,
    pub subset_min_size: usize,
    /// `None` means all features.
    pub subset_max_size: Option<usize>,
    /// Subsets evaluated per node; 0 means every subset.
    pub subset_budget: usize,
    pub min_node_rows: usize,
    pub max_depth: usize,
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineConfig,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            lambda_cem: 0.9,
            lambda_cs: 0.85,
            lambda_ol: 0.01,
            algorithm: Algorithm::KMeans,
            subset_min_size: 2,
            subset_max_size: None,
            subset_budget: 2000,
            min_node_rows: 6,
            max_depth: 10,
            seed: 0,
            engine: EngineConfig::default(),
        }
    }
}

impl Hyperparameters {
    /// Defaults with the preset's thresholds for the given kernel and noise level.
    pub fn from_preset(preset: Preset, algorithm: Algorithm, noise_fraction: f64) -> Self {
        let t = preset.thresholds(algorithm, noise_fraction);
        Hyperparameters {
            lambda_cem: t.lambda_cem,
            lambda_cs: t.lambda_cs,
            lambda_ol: t.lambda_ol,
            algorithm,
            ..Hyperparameters::default()
        }
    }

    pub fn subset_policy(&self, n_features: usize) -> SubsetPolicy {
        SubsetPolicy {
            min_size: self.subset_min_size,
            max_size: self.subset_max_size.unwrap_or(n_features).min(n_features),
            budget: self.subset_budget,
        }
    }

    /// Checks threshold ranges and, when `n_features` is given, the subset range.
    pub fn validate(&self, n_features: Option<usize>) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !in_unit(self.lambda_cem) {
            return Err(Error::invalid(format!("lambda_cem {} must lie in (0, 1]", self.lambda_cem)));
        }
        if !in_unit(self.lambda_cs) {
            return Err(Error::invalid(format!("lambda_cs {} must lie in (0, 1]", self.lambda_cs)));
        }
        if !(0.0..1.0).contains(&self.lambda_ol) {
            return Err(Error::invalid(format!("lambda_ol {} must lie in [0, 1)", self.lambda_ol)));
        }
        if self.lambda_ol >= self.lambda_cem {
            return Err(Error::invalid(format!(
                "lambda_ol {} must be below lambda_cem {}",
                self.lambda_ol, self.lambda_cem
            )));
        }
        if self.subset_min_size < 1 {
            return Err(Error::invalid("subset_min_size must be at least 1"));
        }
        if let Some(max) = self.subset_max_size {
            if max < self.subset_min_size {
                return Err(Error::invalid(format!(
                    "subset_max_size {max} is below subset_min_size {}",
                    self.subset_min_size
                )));
            }
        }
        if let Some(nf) = n_features {
            if self.subset_min_size > nf {
                return Err(Error::invalid(format!(
                    "subset_min_size {} exceeds the {nf} available features",
                    self.subset_min_size
                )));
            }
            if self.subset_max_size.is_some_and(|m| m > nf) {
                return Err(Error::invalid(format!(
                    "subset_max_size {} exceeds the {nf} available features",
                    self.subset_max_size.unwrap_or(0)
                )));
            }
        }
        if self.min_node_rows < 3 {
            return Err(Error::invalid("min_node_rows must be at least 3"));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.engine.kmeans.restarts == 0 {
            return Err(Error::invalid("k-means restarts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub lambda_cem: f64,
    pub lambda_cs: f64,
    pub lambda_ol: f64,
}

/// Published per-dataset threshold settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Coal,
    Ecoli,
    Wine,
    Eucalyptus,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Coal, Preset::Ecoli, Preset::Wine, Preset::Eucalyptus];

    pub fn thresholds(self, algorithm: Algorithm, noise_fraction: f64) -> Thresholds {
        let (lambda_cem, lambda_cs, lambda_ol) = match self {
            Preset::Coal => (0.9, 0.9, 0.01),
            Preset::Ecoli => (0.75, 0.75, 0.04),
            Preset::Wine => (0.7, 0.65, 0.03),
            Preset::Eucalyptus => {
                let cem = match algorithm {
                    Algorithm::KMeans => 0.85,
                    Algorithm::KMedoids => 0.9,
                };
                // tabulated at 0/10/20/30%; 15% splits the bands
                let cs = if noise_fraction < 0.15 { 0.8 } else { 0.75 };
                (cem, cs, 0.02)
            }
        };
        Thresholds { lambda_cem, lambda_cs, lambda_ol }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Coal => "coal",
            Preset::Ecoli => "ecoli",
            Preset::Wine => "wine",
            Preset::Eucalyptus => "eucalyptus",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown preset `{s}` (expected coal, ecoli, wine or eucalyptus)")))
    }
}
