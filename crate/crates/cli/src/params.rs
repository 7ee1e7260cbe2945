use serde::{Deserialize, Serialize};
use sscc::{Algorithm, Hyperparameters, Preset};

use crate::error::{CliError, CliResult};

/// Hyperparameters before the kernel and noise level are known: a preset
/// plus explicit overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HpTemplate {
    pub preset: Option<Preset>,
    pub lambda_cs: Option<f64>,
    pub lambda_cem: Option<f64>,
    pub lambda_ol: Option<f64>,
    pub subset_min: Option<usize>,
    pub subset_max: Option<usize>,
    pub subset_budget: Option<usize>,
    pub min_node_rows: Option<usize>,
    pub max_depth: Option<usize>,
}

impl HpTemplate {
    pub fn build(&self, algorithm: Algorithm, noise_fraction: f64, seed: u64) -> CliResult<Hyperparameters> {
        let mut hp = match self.preset {
            Some(p) => Hyperparameters::from_preset(p, algorithm, noise_fraction),
            None => Hyperparameters { algorithm, ..Hyperparameters::default() },
        };
        if let Some(v) = self.lambda_cs {
            hp.lambda_cs = v;
        }
        if let Some(v) = self.lambda_cem {
            hp.lambda_cem = v;
        }
        if let Some(v) = self.lambda_ol {
            hp.lambda_ol = v;
        }
        if let Some(v) = self.subset_min {
            hp.subset_min_size = v;
        }
        if self.subset_max.is_some() {
            hp.subset_max_size = self.subset_max;
        }
        if let Some(v) = self.subset_budget {
            hp.subset_budget = v;
        }
        if let Some(v) = self.min_node_rows {
            hp.min_node_rows = v;
        }
        if let Some(v) = self.max_depth {
            hp.max_depth = v;
        }
        hp.seed = seed;
        check_flags(&hp)?;
        Ok(hp)
    }
}

/// Threshold checks phrased in terms of the flags.
fn check_flags(hp: &Hyperparameters) -> CliResult<()> {
    if !(hp.lambda_cs > 0.0 && hp.lambda_cs <= 1.0) {
        return Err(CliError::usage(format!("--lambda-cs {} must lie in (0, 1]", hp.lambda_cs)));
    }
    if !(hp.lambda_cem > 0.0 && hp.lambda_cem <= 1.0) {
        return Err(CliError::usage(format!("--lambda-cem {} must lie in (0, 1]", hp.lambda_cem)));
    }
    if !(0.0..1.0).contains(&hp.lambda_ol) {
        return Err(CliError::usage(format!("--lambda-ol {} must lie in [0, 1)", hp.lambda_ol)));
    }
    if hp.lambda_ol >= hp.lambda_cem {
        return Err(CliError::usage(format!(
            "--lambda-ol {} must be below --lambda-cem {}",
            hp.lambda_ol, hp.lambda_cem
        )));
    }
    if hp.subset_min_size == 0 {
        return Err(CliError::usage("--subset-min must be at least 1"));
    }
    if hp.subset_max_size.is_some_and(|m| m < hp.subset_min_size) {
        return Err(CliError::usage("--subset-max must not be below --subset-min"));
    }
    hp.validate(None).map_err(|e| CliError::usage(e.to_string()))
}
