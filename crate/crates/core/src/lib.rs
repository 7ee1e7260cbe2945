//! Semi-supervised cascaded clustering (SSCC).
//!
//! The crate fits a tree of distance-based clusterings over a labeled,
//! possibly mislabeled, tabular dataset. At every node the feature subset
//! whose clustering best agrees with the labels (by completeness) is kept, a
//! cluster evaluation matrix flags (cluster, label) cells that look like label
//! noise, and each cluster either becomes a class or is clustered again. The
//! fitted [`CascadeTree`] doubles as a classifier: new rows descend the tree by
//! nearest center.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below name the common instantiations.
//!
//! ```no_run
//! use sscc::{dataset, cascade, classify, LabelColumn, Hyperparameters};
//!
//! let data: sscc::Dataset64 = dataset::load_csv("wine.csv", &LabelColumn::name("class"))?;
//! let (tree, _report) = cascade::fit(&data, &Hyperparameters::default())?;
//! let first = data.features().row(0).to_vec();
//! let c = classify::classify(&first, &tree, &classify::NoveltyPolicy::default())?;
//! println!("{:?}", c.class_id);
//! # Ok::<(), sscc::Error>(())
//! ```

pub mod cascade;
pub mod classify;
pub mod clustering;
pub mod dataset;
mod error;
pub mod rng;
mod scalar;
pub mod scores;
mod serde_rows;

pub use cascade::{CascadeNode, CascadeTree, FitReport, Hyperparameters, Outcome, Preset};
pub use classify::{Classification, NoveltyPolicy};
pub use clustering::{Algorithm, ClusteringResult};
pub use dataset::{Dataset, LabelColumn, NoiseSpec, NormalizationParams};
pub use error::{Error, Result};
pub use scalar::Scalar;
pub use scores::{CemMatrix, ContingencyTable};

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type NormalizationParams64 = NormalizationParams<f64>;
pub type ClusteringResult64 = ClusteringResult<f64>;
pub type ClusteringResult32 = ClusteringResult<f32>;
pub type CemMatrix64 = CemMatrix<f64>;
pub type CascadeTree64 = CascadeTree<f64>;
pub type CascadeTree32 = CascadeTree<f32>;
pub type FitReport64 = FitReport<f64>;
pub type Classification64 = Classification<f64>;
