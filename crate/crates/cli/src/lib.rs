//! Command-line front end for `sscc`: fit, predict, label-noise injection
//! and the noise-robustness experiment grid.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod params;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sscc::classify::NoveltyPolicy;
use sscc::dataset::load_csv;
use sscc::{Algorithm, Dataset64, LabelColumn, Preset};

pub use error::{CliError, CliResult};
use params::HpTemplate;

#[derive(Debug, Parser)]
#[command(name = "sscc", version, about = "Semi-supervised cascaded clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a cascade and write the model, report and class table.
    Fit(FitArgs),
    /// Classify rows with a fitted model.
    Predict(PredictArgs),
    /// Write a copy of a dataset with randomly replaced labels.
    Noise(NoiseArgs),
    /// Run the noise-robustness grid.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Named threshold preset.
    #[arg(long, value_parser = parse_preset)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lambda_cs: Option<f64>,
    #[arg(long)]
    pub lambda_cem: Option<f64>,
    #[arg(long)]
    pub lambda_ol: Option<f64>,
    /// Smallest feature subset searched (default 2).
    #[arg(long)]
    pub subset_min: Option<usize>,
    /// Largest feature subset searched (default: all features).
    #[arg(long)]
    pub subset_max: Option<usize>,
    /// Subsets evaluated per node; 0 searches all (default 2000).
    #[arg(long)]
    pub subset_budget: Option<usize>,
    #[arg(long)]
    pub min_node_rows: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

impl ThresholdArgs {
    fn template(&self) -> HpTemplate {
        HpTemplate {
            preset: self.preset,
            lambda_cs: self.lambda_cs,
            lambda_cem: self.lambda_cem,
            lambda_ol: self.lambda_ol,
            subset_min: self.subset_min,
            subset_max: self.subset_max,
            subset_budget: self.subset_budget,
            min_node_rows: self.min_node_rows,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "class")]
    pub label_col: String,
    #[arg(long, default_value = "kmeans", value_parser = parse_algo)]
    pub algo: Algorithm,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Noise level used to pick noise-dependent preset values.
    #[arg(long, default_value_t = 0.0)]
    pub noise_level: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra labeled CSV appended to the training data (repeatable).
    #[arg(long)]
    pub append: Vec<PathBuf>,
    /// Model path; the report and class table are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label column to leave out of the features.
    #[arg(long)]
    pub label_col: Option<String>,
    /// Score predictions against the label column.
    #[arg(long)]
    pub truth: bool,
    /// Flag rows far from the centers they pass.
    #[arg(long)]
    pub novelty: bool,
    #[arg(long, default_value_t = 3.0)]
    pub radius_mult: f64,
    /// Leave novel rows out of the accuracy denominator.
    #[arg(long)]
    pub exclude_novel: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write full descent paths as JSON.
    #[arg(long)]
    pub paths_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "class")]
    pub label_col: String,
    #[arg(long)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: next to --out).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "class")]
    pub label_col: String,
    /// Comma-separated kernels.
    #[arg(long, default_value = "kmeans,kmedoids")]
    pub algo: String,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    /// Comma-separated fractions in [0, 1).
    #[arg(long, default_value = "0,0.1,0.2,0.3")]
    pub noise_fractions: String,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replicates: a count `n` (seeds 0..n) or a comma-separated list.
    #[arg(long, default_value = "5")]
    pub seeds: String,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    /// Split without preserving label proportions.
    #[arg(long)]
    pub no_stratify: bool,
    /// Externally produced accuracies to report alongside.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Also write every fitted model.
    #[arg(long)]
    pub save_models: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: sscc::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: sscc::Error| e.to_string())
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|e| CliError::usage(format!("{flag}: `{t}`: {e}"))))
        .collect()
}

fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let s = s.trim();
    if !s.contains(',') {
        if let Ok(n) = s.parse::<u64>() {
            if n == 0 {
                return Err(CliError::usage("--seeds: at least one seed is required"));
            }
            return Ok((0..n).collect());
        }
    }
    parse_list("--seeds", s)
}

fn label(s: &str) -> LabelColumn {
    s.parse().expect("label column parsing is infallible")
}

/// Runs a parsed command, printing its summary to stdout.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => {
            let out = commands::cmd_fit(&commands::FitOptions {
                data: a.data,
                label_col: label(&a.label_col),
                algorithm: a.algo,
                template: a.thresholds.template(),
                noise_level: a.noise_level,
                seed: a.seed,
                append: a.append,
                out: a.out,
            })?;
            println!(
                "{} classes, {} rows removed, depth {}; wrote {}, {}, {}",
                out.tree.classes.len(),
                out.tree.removed.len(),
                out.tree.depth(),
                out.model.display(),
                out.report.display(),
                out.classes.display()
            );
        }
        Command::Predict(a) => {
            if !(a.radius_mult > 0.0) {
                return Err(CliError::usage(format!("--radius-mult {} must be positive", a.radius_mult)));
            }
            let summary = commands::cmd_predict(&commands::PredictOptions {
                model: a.model,
                data: a.data,
                label_col: a.label_col.as_deref().map(label),
                truth: a.truth,
                novelty: NoveltyPolicy { enabled: a.novelty, radius_multiplier: a.radius_mult },
                exclude_novel: a.exclude_novel,
                out: a.out,
                paths_json: a.paths_json,
            })?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Noise(a) => {
            let m = commands::cmd_noise(&commands::NoiseOptions {
                data: a.data,
                label_col: label(&a.label_col),
                fraction: a.fraction,
                seed: a.seed,
                out: a.out,
                manifest: a.manifest,
            })?;
            println!("relabeled {} rows", m.count);
        }
        Command::Experiment(a) => {
            let noise_fractions: Vec<f64> = parse_list("--noise-fractions", &a.noise_fractions)?;
            let spec = experiment::ExperimentSpec {
                data: a.data.clone(),
                label_col: a.label_col.clone(),
                noise_fractions,
                algorithms: parse_list("--algo", &a.algo)?,
                template: a.thresholds.template(),
                test_fraction: a.test_fraction,
                stratified: !a.no_stratify,
                seeds: parse_seeds(&a.seeds)?,
                master_seed: a.seed,
            };
            spec.validate()?;
            let baseline = a.baseline.as_deref().map(experiment::Baseline::load).transpose()?;
            let data: Dataset64 = load_csv(&a.data, &label(&a.label_col))?;
            let grid = experiment::run_and_write(&data, &spec, &a.out, baseline.as_ref(), a.save_models)?;
            print!("{}", experiment::table_csv(&spec, &grid.summary, baseline.as_ref()));
        }
    }
    Ok(())
}

/// Caps the global thread pool from `SSCC_THREADS` when set.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("SSCC_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("SSCC_THREADS=`{v}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot size the thread pool: {e}")))
}
