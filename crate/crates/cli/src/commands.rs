use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sscc::cascade::{fit, load_model, save_model};
use sscc::classify::{classify_batch, evaluate_accuracy, Classification, NoveltyPolicy};
use sscc::dataset::{inject_label_noise, load_csv, read_table};
use sscc::{Algorithm, CascadeTree64, Dataset64, LabelColumn, NoiseSpec};

use crate::error::{CliError, CliResult};
use crate::params::HpTemplate;

/// `m.json` -> `m.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub struct FitOptions {
    pub data: PathBuf,
    pub label_col: LabelColumn,
    pub algorithm: Algorithm,
    pub template: HpTemplate,
    /// Selects preset bands that depend on the noise level.
    pub noise_level: f64,
    pub seed: u64,
    /// Extra labeled rows appended before fitting.
    pub append: Vec<PathBuf>,
    pub out: PathBuf,
}

pub struct FitOutputs {
    pub model: PathBuf,
    pub report: PathBuf,
    pub classes: PathBuf,
    pub tree: CascadeTree64,
}

/// Fits a model and writes the model, the JSON report and the class table.
pub fn cmd_fit(o: &FitOptions) -> CliResult<FitOutputs> {
    let hp = o.template.build(o.algorithm, o.noise_level, o.seed)?;
    let mut data: Dataset64 = load_csv(&o.data, &o.label_col)?;
    for extra in &o.append {
        let more: Dataset64 = load_csv(extra, &o.label_col)?;
        if more.feature_names() != data.feature_names() {
            return Err(CliError::usage(format!(
                "--append {}: columns do not match {}",
                extra.display(),
                o.data.display()
            )));
        }
        data = data.concat(&more)?;
    }
    let (tree, report) = fit(&data, &hp)?;
    let report_path = sibling(&o.out, "report.json");
    let classes_path = sibling(&o.out, "classes.txt");
    save_model(&tree, &o.out)?;
    write(&report_path, &(report.to_json() + "\n"))?;
    write(&classes_path, &report.class_table(&tree))?;
    Ok(FitOutputs { model: o.out.clone(), report: report_path, classes: classes_path, tree })
}

pub struct PredictOptions {
    pub model: PathBuf,
    pub data: PathBuf,
    /// Column to drop from the features; also the truth for `--truth`.
    pub label_col: Option<LabelColumn>,
    pub truth: bool,
    pub novelty: NoveltyPolicy,
    pub exclude_novel: bool,
    pub out: PathBuf,
    pub paths_json: Option<PathBuf>,
}

#[derive(Serialize)]
pub struct PredictSummary {
    pub version: u32,
    pub rows: usize,
    pub novel: usize,
    pub errors: usize,
    pub accuracy: Option<sscc::classify::AccuracyReport>,
}

#[derive(Serialize)]
struct PathRecord<'a> {
    row_id: u64,
    #[serde(flatten)]
    classification: Option<&'a Classification<f64>>,
    error: Option<String>,
}

pub fn cmd_predict(o: &PredictOptions) -> CliResult<PredictSummary> {
    if o.truth && o.label_col.is_none() {
        return Err(CliError::usage("--truth needs --label-col"));
    }
    let tree: CascadeTree64 = load_model(&o.model)?;
    let table = read_table::<f64>(&o.data, o.label_col.as_ref())?;
    if table.feature_names.len() != tree.n_features() {
        return Err(CliError::usage(format!(
            "{}: {} feature columns, model expects {}",
            o.data.display(),
            table.feature_names.len(),
            tree.n_features()
        )));
    }
    if table.feature_names != tree.feature_names {
        log::warn!("feature names differ from the model's; matching columns by position");
    }
    for bad in &table.bad_cells {
        log::warn!("row {}, column `{}`: cannot parse `{}`", bad.row, bad.column, bad.value);
    }
    let rows: Vec<Vec<f64>> = table.features.outer_iter().map(|r| r.to_vec()).collect();
    let batch = classify_batch(&rows, &tree, &o.novelty);

    let mut w = csv::Writer::from_path(&o.out).map_err(|e| CliError::usage(format!("{}: {e}", o.out.display())))?;
    w.write_record(["row_id", "predicted_class", "dominant_label", "novelty_flag", "leaf_node_id"])?;
    for (id, r) in table.row_ids.iter().zip(&batch.results) {
        let id = id.to_string();
        match r {
            Ok(c) => {
                let (class, label) = match c.class_id {
                    Some(k) => (k.to_string(), tree.class_label(k).unwrap_or_default().to_string()),
                    None => (String::new(), "NOVEL".to_string()),
                };
                let flag = if c.is_novel() { "1" } else { "0" };
                w.write_record([id.as_str(), &class, &label, flag, &c.last_node().to_string()])?;
            }
            Err(_) => w.write_record([id.as_str(), "", "", "", ""])?,
        }
    }
    w.flush().map_err(|e| CliError::io(&o.out, e))?;

    if let Some(p) = &o.paths_json {
        let records: Vec<PathRecord<'_>> = table
            .row_ids
            .iter()
            .zip(&batch.results)
            .map(|(&row_id, r)| PathRecord {
                row_id,
                classification: r.as_ref().ok(),
                error: r.as_ref().err().map(ToString::to_string),
            })
            .collect();
        write(p, &(serde_json::to_string_pretty(&records).expect("paths serialize") + "\n"))?;
    }

    let accuracy = if o.truth {
        let names = table.labels.as_ref().expect("label column requested");
        let index: HashMap<&str, usize> = tree.label_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        // labels the model never saw can never be matched
        let truth: Vec<usize> = names.iter().map(|n| index.get(n.as_str()).copied().unwrap_or(usize::MAX)).collect();
        Some(evaluate_accuracy(&batch.results, &truth, &tree, o.exclude_novel)?)
    } else {
        None
    };
    Ok(PredictSummary { version: 1, rows: rows.len(), novel: batch.novel, errors: batch.errors, accuracy })
}

pub struct NoiseOptions {
    pub data: PathBuf,
    pub label_col: LabelColumn,
    pub fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifestRow {
    pub row_id: u64,
    pub original: String,
    pub new: String,
}

#[derive(Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub source: String,
    pub fraction: f64,
    pub seed: u64,
    pub count: usize,
    pub rows: Vec<ManifestRow>,
}

/// Writes a copy of the CSV with some labels replaced, and a manifest of the
/// replaced rows. Every other cell is copied verbatim.
pub fn cmd_noise(o: &NoiseOptions) -> CliResult<Manifest> {
    if !(0.0..1.0).contains(&o.fraction) {
        return Err(CliError::usage(format!("--fraction {} must lie in [0, 1)", o.fraction)));
    }
    let data: Dataset64 = load_csv(&o.data, &o.label_col)?;
    if o.fraction > 0.0 && data.distinct_labels() < 2 {
        return Err(CliError::usage(format!("{}: label noise needs at least two labels", o.data.display())));
    }
    let (noisy, corrupted) = inject_label_noise(&data, &NoiseSpec { fraction: o.fraction, seed: o.seed })?;
    let names = data.label_names();
    let by_id: HashMap<u64, usize> = data.row_ids().iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let rows: Vec<ManifestRow> = corrupted
        .iter()
        .map(|id| {
            let i = by_id[id];
            ManifestRow {
                row_id: *id,
                original: names[data.labels()[i]].clone(),
                new: names[noisy.labels()[i]].clone(),
            }
        })
        .collect();

    let mut rdr = csv::ReaderBuilder::new().from_path(&o.data)?;
    let header = rdr.headers()?.clone();
    let label_at = header
        .iter()
        .position(|h| h.trim() == data.label_column())
        .ok_or_else(|| CliError::usage(format!("label column `{}` not found", data.label_column())))?;
    let mut w = csv::Writer::from_path(&o.out).map_err(|e| CliError::usage(format!("{}: {e}", o.out.display())))?;
    w.write_record(&header)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if noisy.labels()[i] != data.labels()[i] {
            fields[label_at] = names[noisy.labels()[i]].clone();
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| CliError::io(&o.out, e))?;

    let manifest = Manifest {
        version: 1,
        source: o.data.display().to_string(),
        fraction: o.fraction,
        seed: o.seed,
        count: rows.len(),
        rows,
    };
    let path = o.manifest.clone().unwrap_or_else(|| sibling(&o.out, "manifest.json"));
    write(&path, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))?;
    Ok(manifest)
}
