//! Labeled tabular data: CSV ingestion, z-score normalization, symmetric
//! label-noise injection and (stratified) train/test splitting.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for;
use crate::{Error, Result, Scalar};

/// Name of the optional column carrying stable row identifiers.
pub const ROW_ID_COLUMN: &str = "__row_id";

/// Selects the label column of a CSV file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    /// Header name. If no header matches and the text is an integer, it is
    /// used as a 0-based column index.
    Name(String),
    Index(usize),
}

impl LabelColumn {
    pub fn name(s: impl Into<String>) -> Self {
        LabelColumn::Name(s.into())
    }

    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < header.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::MissingLabelColumn(i.to_string())),
            LabelColumn::Name(name) => header
                .iter()
                .position(|h| h == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < header.len()))
                .ok_or_else(|| Error::MissingLabelColumn(name.clone())),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(LabelColumn::Name(s.to_string()))
    }
}

/// Feature matrix plus integer-coded labels.
///
/// Labels are codes into `label_names`; `row_ids` survive every subsetting
/// operation so rows can be traced back to the source file.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    features: Array2<T>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    label_names: Vec<String>,
    row_ids: Vec<u64>,
    label_column: String,
    label_position: usize,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset, checking shapes, label range, finiteness and row id
    /// uniqueness. The label column is named `label` and placed last when the
    /// dataset is written back to CSV.
    pub fn new(
        features: Array2<T>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
        row_ids: Vec<u64>,
    ) -> Result<Self> {
        let position = feature_names.len();
        Self::with_label_column(features, labels, feature_names, label_names, row_ids, "label".into(), position)
    }

    /// Convenience constructor with generated names and row ids `0..n`.
    pub fn from_parts(features: Array2<T>, labels: Vec<usize>) -> Result<Self> {
        let n_labels = labels.iter().max().map_or(0, |m| m + 1);
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let label_names = (0..n_labels).map(|c| format!("L{c}")).collect();
        let row_ids = (0..features.nrows() as u64).collect();
        Self::new(features, labels, feature_names, label_names, row_ids)
    }

    fn with_label_column(
        features: Array2<T>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
        row_ids: Vec<u64>,
        label_column: String,
        label_position: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
        }
        if row_ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: row_ids.len() });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                actual: feature_names.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= label_names.len()) {
            return Err(Error::invalid(format!(
                "label code {bad} outside 0..{}",
                label_names.len()
            )));
        }
        for (j, col) in features.axis_iter(Axis(1)).enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { feature: j });
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        if let Some(dup) = row_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::invalid(format!("duplicate row id {dup}")));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            label_names,
            row_ids,
            label_position,
            label_column,
        })
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Size of the label set (not the number of labels present).
    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    /// Number of distinct labels that actually occur.
    pub fn distinct_labels(&self) -> usize {
        let mut present = vec![false; self.n_labels()];
        self.labels.iter().for_each(|&l| present[l] = true);
        present.into_iter().filter(|&p| p).count()
    }

    /// Rows at the given positions, in the given order.
    pub fn select_rows(&self, positions: &[usize]) -> Dataset<T> {
        Dataset {
            features: self.features.select(Axis(0), positions),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
            label_column: self.label_column.clone(),
            label_position: self.label_position,
        }
    }

    /// Same rows with replaced labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset<T>> {
        if labels.len() != self.n_rows() {
            return Err(Error::DimensionMismatch { expected: self.n_rows(), actual: labels.len() });
        }
        if labels.iter().any(|&l| l >= self.n_labels()) {
            return Err(Error::invalid("label code outside the label set"));
        }
        Ok(Dataset { labels, ..self.clone() })
    }

    /// Same rows and labels with a replaced feature matrix of identical shape.
    fn with_features(&self, features: Array2<T>) -> Dataset<T> {
        Dataset { features, ..self.clone() }
    }

    /// Appends the rows of `other`. Labels are matched by name; names unseen
    /// in `self` extend the label set. Row ids of `other` are shifted past the
    /// largest id of `self`.
    pub fn concat(&self, other: &Dataset<T>) -> Result<Dataset<T>> {
        if other.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: other.n_features(),
            });
        }
        let mut label_names = self.label_names.clone();
        let mut remap = Vec::with_capacity(other.n_labels());
        for name in &other.label_names {
            let code = match label_names.iter().position(|n| n == name) {
                Some(c) => c,
                None => {
                    label_names.push(name.clone());
                    label_names.len() - 1
                }
            };
            remap.push(code);
        }
        let offset = self.row_ids.iter().max().map_or(0, |m| m + 1);
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), other.features.view()])
            .map_err(|e| Error::invariant(e.to_string()))?;
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().map(|&l| remap[l]));
        let mut row_ids = self.row_ids.clone();
        row_ids.extend(other.row_ids.iter().map(|&r| r + offset));
        Self::with_label_column(
            features,
            labels,
            self.feature_names.clone(),
            label_names,
            row_ids,
            self.label_column.clone(),
            self.label_position,
        )
    }
}

/// A CSV file read without the strict numeric checks of [`load_csv`].
///
/// Unparseable feature cells become NaN and are listed in `bad_cells`.
#[derive(Clone, Debug)]
pub struct RawTable<T> {
    pub feature_names: Vec<String>,
    pub features: Array2<T>,
    /// Raw label strings when a label column was requested.
    pub labels: Option<Vec<String>>,
    pub label_column: Option<(String, usize)>,
    pub row_ids: Vec<u64>,
    pub bad_cells: Vec<BadCell>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadCell {
    /// 1-based data row.
    pub row: usize,
    pub column: String,
    pub value: String,
}

/// Reads a comma-separated file with a header row.
///
/// A `__row_id` column, if present, supplies row ids; otherwise ids are
/// `0..n`. The label column, when given, is excluded from the features.
pub fn read_table<T: Scalar>(path: impl AsRef<Path>, label: Option<&LabelColumn>) -> Result<RawTable<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv { path: path.to_path_buf(), message: e.to_string() };

    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let label_idx = label.map(|l| l.resolve(&header)).transpose()?;
    let row_id_idx = header.iter().position(|h| h == ROW_ID_COLUMN);
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&j| Some(j) != label_idx && Some(j) != row_id_idx)
        .collect();

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    let mut row_ids = Vec::new();
    let mut bad_cells = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        for &j in &feature_cols {
            let cell = &record[j];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => flat.push(T::of(v)),
                _ => {
                    bad_cells.push(BadCell { row, column: header[j].clone(), value: cell.to_string() });
                    flat.push(T::nan());
                }
            }
        }
        if let Some(li) = label_idx {
            labels.push(record[li].to_string());
        }
        let id = match row_id_idx {
            Some(ri) => record[ri].parse::<u64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row,
                column: ROW_ID_COLUMN.to_string(),
                value: record[ri].to_string(),
            })?,
            None => r as u64,
        };
        row_ids.push(id);
    }
    if row_ids.is_empty() {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let features = Array2::from_shape_vec((row_ids.len(), feature_cols.len()), flat)
        .map_err(|e| Error::invariant(e.to_string()))?;
    // position of the label among the non-row-id columns
    let label_column = label_idx.map(|li| {
        let pos = (0..li).filter(|&j| Some(j) != row_id_idx).count();
        (header[li].clone(), pos)
    });
    Ok(RawTable {
        feature_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
        features,
        labels: label_idx.map(|_| labels),
        label_column,
        row_ids,
        bad_cells,
    })
}

/// Loads a labeled dataset. Labels are coded in order of first appearance.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let raw = read_table::<T>(path, Some(label))?;
    if let Some(bad) = raw.bad_cells.into_iter().next() {
        return Err(Error::NonNumeric { path: path.to_path_buf(), row: bad.row, column: bad.column, value: bad.value });
    }
    let (label_column, label_position) = raw.label_column.expect("label column was requested");
    let (labels, label_names) = encode_labels(raw.labels.expect("label column was requested"));
    Dataset::with_label_column(
        raw.features,
        labels,
        raw.feature_names,
        label_names,
        raw.row_ids,
        label_column,
        label_position,
    )
}

/// Codes string labels by first appearance.
pub fn encode_labels(raw: Vec<String>) -> (Vec<usize>, Vec<String>) {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let codes = raw
        .into_iter()
        .map(|s| {
            *index.entry(s).or_insert_with_key(|k| {
                names.push(k.clone());
                names.len() - 1
            })
        })
        .collect();
    (codes, names)
}

/// Writes the dataset with its original header layout, optionally followed by
/// a `__row_id` column.
pub fn write_csv<T: Scalar>(data: &Dataset<T>, path: impl AsRef<Path>, with_row_id: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    write_csv_to(data, &mut out, with_row_id).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<T: Scalar, W: Write>(data: &Dataset<T>, w: W, with_row_id: bool) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let pos = data.label_position.min(data.n_features());
    let mut header: Vec<&str> = data.feature_names.iter().map(String::as_str).collect();
    header.insert(pos, &data.label_column);
    if with_row_id {
        header.push(ROW_ID_COLUMN);
    }
    writer.write_record(&header)?;
    for (i, row) in data.features.outer_iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.insert(pos, data.label_names[data.labels[i]].clone());
        if with_row_id {
            cells.push(data.row_ids[i].to_string());
        }
        writer.write_record(&cells)?;
    }
    writer.flush()
}

/// Per-feature mean and scale for z-score normalization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_row(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), actual: x.len() });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    pub fn denormalize_row(&self, z: ArrayView1<'_, T>) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.mean.len() != self.scale.len() {
            return Err(Error::invariant("normalization mean/scale length mismatch"));
        }
        if self.scale.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(Error::invariant("normalization scale must be positive and finite"));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invariant("normalization mean must be finite"));
        }
        Ok(())
    }
}

/// Mean and population standard deviation per feature. Zero-variance
/// features get scale 1.
pub fn fit_normalization<T: Scalar>(data: &Dataset<T>) -> Result<NormalizationParams<T>> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    let nf = T::of_usize(n);
    let mut mean = Vec::with_capacity(data.n_features());
    let mut scale = Vec::with_capacity(data.n_features());
    for col in data.features.axis_iter(Axis(1)) {
        let m = col.iter().copied().sum::<T>() / nf;
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nf;
        let sd = var.sqrt();
        mean.push(m);
        scale.push(if sd > T::zero() { sd } else { T::one() });
    }
    Ok(NormalizationParams { mean, scale })
}

pub fn apply_normalization<T: Scalar>(data: &Dataset<T>, params: &NormalizationParams<T>) -> Result<Dataset<T>> {
    if params.n_features() != data.n_features() {
        return Err(Error::DimensionMismatch { expected: params.n_features(), actual: data.n_features() });
    }
    let mut features = data.features.clone();
    for (j, mut col) in features.axis_iter_mut(Axis(1)).enumerate() {
        let (m, s) = (params.mean[j], params.scale[j]);
        col.mapv_inplace(|v| (v - m) / s);
    }
    Ok(data.with_features(features))
}

/// Inverse of [`apply_normalization`].
pub fn invert_normalization<T: Scalar>(data: &Dataset<T>, params: &NormalizationParams<T>) -> Result<Dataset<T>> {
    if params.n_features() != data.n_features() {
        return Err(Error::DimensionMismatch { expected: params.n_features(), actual: data.n_features() });
    }
    let mut features = data.features.clone();
    for (j, mut col) in features.axis_iter_mut(Axis(1)).enumerate() {
        let (m, s) = (params.mean[j], params.scale[j]);
        col.mapv_inplace(|v| v * s + m);
    }
    Ok(data.with_features(features))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Number of rows relabeled out of `n_rows`.
    pub fn count(&self, n_rows: usize) -> usize {
        ((self.fraction * n_rows as f64).round() as usize).min(n_rows)
    }
}

/// Relabels `round(fraction * n)` distinct rows, each to a label drawn
/// uniformly from the other labels. Returns the corrupted row ids in row
/// order.
pub fn inject_label_noise<T: Scalar>(data: &Dataset<T>, spec: &NoiseSpec) -> Result<(Dataset<T>, Vec<u64>)> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(Error::invalid(format!("noise fraction {} outside [0, 1]", spec.fraction)));
    }
    let count = spec.count(data.n_rows());
    if count == 0 {
        return Ok((data.clone(), Vec::new()));
    }
    let n_labels = data.n_labels();
    if n_labels < 2 {
        return Err(Error::invalid("label noise needs at least two labels"));
    }
    let mut rng = rng_for(spec.seed, &[0x6e6f_6973_65]);
    let mut chosen = rand::seq::index::sample(&mut rng, data.n_rows(), count).into_vec();
    chosen.sort_unstable();
    let mut labels = data.labels.clone();
    for &i in &chosen {
        let r = rng.gen_range(0..n_labels - 1);
        labels[i] = if r >= labels[i] { r + 1 } else { r };
    }
    let ids = chosen.iter().map(|&i| data.row_ids[i]).collect();
    Ok((data.with_labels(labels)?, ids))
}

/// Splits rows into disjoint train and test sets.
///
/// The test set has `floor(test_fraction * n + 0.5)` rows. In stratified mode
/// that total is distributed over labels by largest remainder, never taking
/// every row of a label. Both outputs keep the original row order.
pub fn train_test_split<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let n = data.n_rows();
    let n_test = (test_fraction * n as f64 + 0.5).floor() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} leaves an empty side with {n} rows"
        )));
    }
    let mut rng = rng_for(seed, &[0x7370_6c69_74]);
    let mut in_test = vec![false; n];
    if stratified {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); data.n_labels()];
        for (i, &l) in data.labels.iter().enumerate() {
            groups[l].push(i);
        }
        let quotas = stratified_quotas(&groups.iter().map(Vec::len).collect::<Vec<_>>(), test_fraction, n_test);
        for (group, quota) in groups.iter_mut().zip(quotas) {
            group.shuffle(&mut rng);
            group.iter().take(quota).for_each(|&i| in_test[i] = true);
        }
        if !in_test.iter().any(|&t| t) {
            return Err(Error::invalid("stratified split produced an empty test set"));
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order.iter().take(n_test).for_each(|&i| in_test[i] = true);
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_test[i]);
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

/// Largest-remainder allocation of `total` test rows over label groups.
fn stratified_quotas(sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let cap = |s: usize| s.saturating_sub(1);
    let mut quotas: Vec<usize> = sizes
        .iter()
        .map(|&s| ((fraction * s as f64).floor() as usize).min(cap(s)))
        .collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // largest fractional part first, then lower label index
    order.sort_by(|&a, &b| {
        let fa = fraction * sizes[a] as f64 - quotas[a] as f64;
        let fb = fraction * sizes[b] as f64 - quotas[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    while assigned < total {
        let Some(&g) = order.iter().find(|&&g| quotas[g] < cap(sizes[g])) else { break };
        quotas[g] += 1;
        assigned += 1;
        order.retain(|&o| o != g);
        if order.is_empty() {
            break;
        }
    }
    quotas
}
