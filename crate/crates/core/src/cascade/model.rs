//! Versioned JSON model files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{CascadeNode, CascadeTree, ClassRecord, RemovedRow};
use super::Hyperparameters;
use crate::dataset::NormalizationParams;
use crate::{Error, Result, Scalar};

pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelRef<'a, T> {
    version: u32,
    normalization: &'a NormalizationParams<T>,
    hyperparameters: &'a Hyperparameters,
    nodes: &'a [CascadeNode<T>],
    classes: &'a [ClassRecord],
    removed: &'a [RemovedRow<T>],
    label_names: &'a [String],
    feature_names: &'a [String],
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "T: Scalar"), deny_unknown_fields)]
struct ModelFile<T> {
    version: u32,
    normalization: NormalizationParams<T>,
    hyperparameters: Hyperparameters,
    nodes: Vec<CascadeNode<T>>,
    classes: Vec<ClassRecord>,
    removed: Vec<RemovedRow<T>>,
    label_names: Vec<String>,
    feature_names: Vec<String>,
}

pub fn model_to_json<T: Scalar>(tree: &CascadeTree<T>) -> String {
    let file = ModelRef {
        version: MODEL_VERSION,
        normalization: &tree.normalization,
        hyperparameters: &tree.hyperparameters,
        nodes: &tree.nodes,
        classes: &tree.classes,
        removed: &tree.removed,
        label_names: &tree.label_names,
        feature_names: &tree.feature_names,
    };
    serde_json::to_string_pretty(&file).expect("trees always serialize")
}

/// Parses and validates a model.
pub fn model_from_json<T: Scalar>(text: &str) -> Result<CascadeTree<T>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::CorruptModel(e.to_string()))?;
    let found = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::CorruptModel("missing `version`".into()))?;
    if found != u64::from(MODEL_VERSION) {
        return Err(Error::SchemaVersion {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: MODEL_VERSION,
        });
    }
    let file: ModelFile<T> = serde_json::from_value(value).map_err(|e| Error::CorruptModel(e.to_string()))?;
    debug_assert_eq!(file.version, MODEL_VERSION);
    let tree = CascadeTree {
        normalization: file.normalization,
        hyperparameters: file.hyperparameters,
        nodes: file.nodes,
        classes: file.classes,
        removed: file.removed,
        label_names: file.label_names,
        feature_names: file.feature_names,
    };
    tree.validate()?;
    Ok(tree)
}

pub fn save_model<T: Scalar>(tree: &CascadeTree<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_json(tree);
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<CascadeTree<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
