//! Noise-robustness grid: for every (noise fraction, kernel, seed) cell,
//! split, corrupt the training side only, fit, and score on the clean test
//! side.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sscc::cascade::{fit, model_to_json};
use sscc::classify::{classify_batch, evaluate_accuracy, NoveltyPolicy};
use sscc::dataset::{inject_label_noise, train_test_split};
use sscc::rng::derive_seed;
use sscc::{Algorithm, CascadeTree64, Dataset64, FitReport64, NoiseSpec};

use crate::error::{CliError, CliResult};
use crate::params::HpTemplate;

pub const GRID_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: PathBuf,
    pub label_col: String,
    pub noise_fractions: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub template: HpTemplate,
    pub test_fraction: f64,
    pub stratified: bool,
    /// Replicate seeds; each gives its own split shared by every cell.
    pub seeds: Vec<u64>,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.noise_fractions.is_empty() {
            return Err(CliError::usage("--noise-fractions is empty"));
        }
        if let Some(f) = self.noise_fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return Err(CliError::usage(format!("--noise-fractions: {f} is outside [0, 1)")));
        }
        if self.seeds.is_empty() {
            return Err(CliError::usage("at least one seed is required"));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::usage("at least one algorithm is required"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CliError::usage(format!("--test-fraction {} must lie in (0, 1)", self.test_fraction)));
        }
        Ok(())
    }
}

/// Coordinates of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub noise_fraction: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Cell {
    pub fn split_seed(&self, master: u64) -> u64 {
        derive_seed(master, &[0x73706c, self.seed])
    }

    pub fn noise_seed(&self, master: u64) -> u64 {
        derive_seed(master, &[0x6e6f6973, self.seed, self.noise_fraction.to_bits()])
    }

    pub fn fit_seed(&self, master: u64) -> u64 {
        let algo = match self.algorithm {
            Algorithm::KMeans => 0,
            Algorithm::KMedoids => 1,
        };
        derive_seed(master, &[0x666974, self.seed, self.noise_fraction.to_bits(), algo])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub noise_fraction: f64,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_corrupted: usize,
    pub n_removed: usize,
    /// Removed rows that had been corrupted.
    pub removed_corrupted: usize,
    pub n_classes: usize,
    pub depth: usize,
    pub error: Option<String>,
}

/// Everything a cell produced.
pub struct CellOutput {
    pub result: CellResult,
    pub tree: CascadeTree64,
    pub report: FitReport64,
    pub train: Dataset64,
    pub test: Dataset64,
    pub corrupted: Vec<u64>,
}

/// Runs one cell.
pub fn run_cell(
    data: &Dataset64,
    cell: Cell,
    template: &HpTemplate,
    test_fraction: f64,
    stratified: bool,
    master_seed: u64,
) -> CliResult<CellOutput> {
    let (train, test) = train_test_split(data, test_fraction, cell.split_seed(master_seed), stratified)?;
    check_test_is_pristine(data, &test)?;
    let spec = NoiseSpec { fraction: cell.noise_fraction, seed: cell.noise_seed(master_seed) };
    let (noisy, corrupted) = inject_label_noise(&train, &spec)?;
    let hp = template.build(cell.algorithm, cell.noise_fraction, cell.fit_seed(master_seed))?;
    let (tree, report) = fit(&noisy, &hp)?;
    let rows: Vec<Vec<f64>> = test.features().outer_iter().map(|r| r.to_vec()).collect();
    let batch = classify_batch(&rows, &tree, &NoveltyPolicy::default());
    let acc = evaluate_accuracy(&batch.results, test.labels(), &tree, false)?;
    let removed = tree.removed_row_ids();
    let result = CellResult {
        noise_fraction: cell.noise_fraction,
        algorithm: cell.algorithm,
        seed: cell.seed,
        accuracy: Some(acc.accuracy),
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        n_corrupted: corrupted.len(),
        n_removed: tree.removed.len(),
        removed_corrupted: corrupted.iter().filter(|id| removed.contains(id)).count(),
        n_classes: tree.classes.len(),
        depth: tree.depth(),
        error: None,
    };
    Ok(CellOutput { result, tree, report, train: noisy, test, corrupted })
}

/// Test labels must equal the labels of the same rows in the source data.
fn check_test_is_pristine(data: &Dataset64, test: &Dataset64) -> CliResult<()> {
    let source: HashMap<u64, usize> = data.row_ids().iter().copied().zip(data.labels().iter().copied()).collect();
    for (id, label) in test.row_ids().iter().zip(test.labels()) {
        if source.get(id) != Some(label) {
            return Err(sscc::Error::Invariant(format!("test row {id} does not carry its original label")).into());
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise_fraction: f64,
    pub algorithm: Algorithm,
    pub mean: Option<f64>,
    /// Sample standard deviation across seeds; 0 for a single seed.
    pub std: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub version: u32,
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

pub struct GridRun {
    pub grid: Grid,
    /// Wall time per cell, in cell order.
    pub seconds: Vec<f64>,
    /// Model JSON per successful cell, in cell order.
    pub models: Vec<Option<String>>,
}

pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for &noise_fraction in &spec.noise_fractions {
        for &algorithm in &spec.algorithms {
            for &seed in &spec.seeds {
                out.push(Cell { noise_fraction, algorithm, seed });
            }
        }
    }
    out
}

/// Runs the grid. Cell failures are recorded, not propagated.
pub fn run_grid(data: &Dataset64, spec: &ExperimentSpec) -> CliResult<GridRun> {
    spec.validate()?;
    let coords = cells(spec);
    let outcomes: Vec<(CellResult, f64, Option<String>)> = coords
        .par_iter()
        .map(|&cell| {
            let start = Instant::now();
            let out = run_cell(data, cell, &spec.template, spec.test_fraction, spec.stratified, spec.master_seed);
            let secs = start.elapsed().as_secs_f64();
            match out {
                Ok(o) => {
                    log::info!(
                        "noise {} {} seed {}: accuracy {:.4}",
                        cell.noise_fraction,
                        cell.algorithm,
                        cell.seed,
                        o.result.accuracy.unwrap_or(f64::NAN)
                    );
                    (o.result, secs, Some(model_to_json(&o.tree)))
                }
                Err(e) => {
                    log::warn!("noise {} {} seed {} failed: {e}", cell.noise_fraction, cell.algorithm, cell.seed);
                    (failed_cell(cell, &e), secs, None)
                }
            }
        })
        .collect();
    let mut cells_out = Vec::with_capacity(outcomes.len());
    let mut seconds = Vec::with_capacity(outcomes.len());
    let mut models = Vec::with_capacity(outcomes.len());
    for (r, s, m) in outcomes {
        cells_out.push(r);
        seconds.push(s);
        models.push(m);
    }
    let summary = summarize(spec, &cells_out);
    Ok(GridRun { grid: Grid { version: GRID_VERSION, spec: spec.clone(), cells: cells_out, summary }, seconds, models })
}

fn failed_cell(cell: Cell, e: &CliError) -> CellResult {
    CellResult {
        noise_fraction: cell.noise_fraction,
        algorithm: cell.algorithm,
        seed: cell.seed,
        accuracy: None,
        n_train: 0,
        n_test: 0,
        n_corrupted: 0,
        n_removed: 0,
        removed_corrupted: 0,
        n_classes: 0,
        depth: 0,
        error: Some(e.to_string()),
    }
}

pub fn summarize(spec: &ExperimentSpec, cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &noise in &spec.noise_fractions {
        for &algo in &spec.algorithms {
            let group: Vec<&CellResult> =
                cells.iter().filter(|c| c.noise_fraction == noise && c.algorithm == algo).collect();
            let acc: Vec<f64> = group.iter().filter_map(|c| c.accuracy).collect();
            let n = acc.len();
            let mean = (n > 0).then(|| acc.iter().sum::<f64>() / n as f64);
            let std = mean.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    (acc.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            rows.push(SummaryRow {
                noise_fraction: noise,
                algorithm: algo,
                mean,
                std,
                min: acc.iter().copied().reduce(f64::min),
                max: acc.iter().copied().reduce(f64::max),
                n_ok: n,
                n_failed: group.len() - n,
            });
        }
    }
    rows
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One line per cell.
pub fn cells_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(
        "noise_fraction,algorithm,seed,accuracy,n_train,n_test,n_corrupted,n_removed,removed_corrupted,n_classes,depth,error\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.noise_fraction,
            c.algorithm,
            c.seed,
            fmt_opt(c.accuracy),
            c.n_train,
            c.n_test,
            c.n_corrupted,
            c.n_removed,
            c.removed_corrupted,
            c.n_classes,
            c.depth,
            c.error.as_deref().map(csv_field).unwrap_or_default()
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Externally produced accuracies keyed by noise fraction, for side-by-side
/// reporting. The first column is the noise level (a fraction, or a percent
/// when above 1); the other columns are copied through.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Baseline {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<String>)>,
}

impl Baseline {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(CliError::usage(format!("{}: baseline needs a noise column and at least one value column", path.display())));
        }
        let columns = header.iter().skip(1).map(|c| format!("baseline_{c}")).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let noise: f64 = rec[0].parse().map_err(|_| {
                CliError::usage(format!("{}: row {}: noise level `{}` is not a number", path.display(), i + 1, &rec[0]))
            })?;
            let noise = if noise > 1.0 { noise / 100.0 } else { noise };
            rows.push((noise, rec.iter().skip(1).map(str::to_string).collect()));
        }
        Ok(Baseline { columns, rows })
    }

    fn lookup(&self, noise: f64) -> Option<&[String]> {
        self.rows.iter().find(|(n, _)| (n - noise).abs() < 1e-9).map(|(_, v)| v.as_slice())
    }
}

/// One row per noise level, one mean/std column pair per kernel, accuracies
/// in percent.
pub fn table_csv(spec: &ExperimentSpec, summary: &[SummaryRow], baseline: Option<&Baseline>) -> String {
    let mut out = String::from("mislabeling_pct");
    for a in &spec.algorithms {
        out.push_str(&format!(",sscc_{a}_mean,sscc_{a}_std"));
    }
    if let Some(b) = baseline {
        for c in &b.columns {
            out.push(',');
            out.push_str(&csv_field(c));
        }
    }
    out.push('\n');
    for &noise in &spec.noise_fractions {
        out.push_str(&format!("{}", (noise * 1000.0).round() / 10.0));
        for &a in &spec.algorithms {
            let row = summary.iter().find(|r| r.noise_fraction == noise && r.algorithm == a);
            let pct = |v: Option<f64>| v.map(|x| format!("{:.2}", x * 100.0)).unwrap_or_default();
            out.push_str(&format!(",{},{}", pct(row.and_then(|r| r.mean)), pct(row.and_then(|r| r.std))));
        }
        if let Some(b) = baseline {
            let vals = b.lookup(noise);
            for i in 0..b.columns.len() {
                out.push(',');
                out.push_str(&vals.and_then(|v| v.get(i)).map(|s| csv_field(s)).unwrap_or_default());
            }
        }
        out.push('\n');
    }
    out
}

/// Timing sidecar; the only experiment output that varies between runs.
#[derive(Serialize)]
struct Meta<'a> {
    version: u32,
    started_unix: u64,
    finished_unix: u64,
    threads: usize,
    total_seconds: f64,
    cells: Vec<CellTiming<'a>>,
}

#[derive(Serialize)]
struct CellTiming<'a> {
    noise_fraction: f64,
    algorithm: &'a Algorithm,
    seed: u64,
    seconds: f64,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs the grid and writes `grid.csv`, `grid.json`, `table.csv` and
/// `meta.json` (plus `models/` when asked) into `out_dir`.
pub fn run_and_write(
    data: &Dataset64,
    spec: &ExperimentSpec,
    out_dir: &Path,
    baseline: Option<&Baseline>,
    save_models: bool,
) -> CliResult<Grid> {
    let started = unix_now();
    let clock = Instant::now();
    let run = run_grid(data, spec)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let write = |name: &str, text: String| -> CliResult<()> {
        let p = out_dir.join(name);
        fs::write(&p, text).map_err(|e| CliError::io(p, e))
    };
    write("grid.csv", cells_csv(&run.grid.cells))?;
    write("grid.json", serde_json::to_string_pretty(&run.grid).expect("grid serializes") + "\n")?;
    write("table.csv", table_csv(spec, &run.grid.summary, baseline))?;
    if save_models {
        let dir = out_dir.join("models");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for (c, m) in run.grid.cells.iter().zip(&run.models) {
            if let Some(m) = m {
                let name = format!("noise{:03}_{}_seed{}.json", (c.noise_fraction * 100.0).round() as u32, c.algorithm, c.seed);
                let p = dir.join(name);
                fs::write(&p, format!("{m}\n")).map_err(|e| CliError::io(p, e))?;
            }
        }
    }
    let meta = Meta {
        version: GRID_VERSION,
        started_unix: started,
        finished_unix: unix_now(),
        threads: rayon::current_num_threads(),
        total_seconds: clock.elapsed().as_secs_f64(),
        cells: run
            .grid
            .cells
            .iter()
            .zip(&run.seconds)
            .map(|(c, &seconds)| CellTiming { noise_fraction: c.noise_fraction, algorithm: &c.algorithm, seed: c.seed, seconds })
            .collect(),
    };
    write("meta.json", serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n")?;
    Ok(run.grid)
}
