//! Records written by the subcommands and read back by `evaluate`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaScore {
    pub lambda: f64,
    pub lpml: f64,
    pub k_hat: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub size: usize,
    pub beta_tilde: Vec<f64>,
    pub sigma2: f64,
}

/// Result of `fit` for one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub data: String,
    pub n: usize,
    pub parts: usize,
    pub covariates: usize,
    pub selected_lambda: f64,
    pub lpml: Vec<LambdaScore>,
    /// Position of the Dahl draw among the kept draws of the selected chain.
    pub dahl_draw: usize,
    pub dahl_iteration: usize,
    pub k_hat: usize,
    pub ids: Vec<String>,
    /// Labels `1..=k_hat`.
    pub z_hat: Vec<usize>,
    pub clusters: Vec<ClusterSummary>,
    pub eta_hat: Vec<f64>,
    /// 2.5% and 97.5% quantiles over the kept draws.
    pub eta_interval: Vec<[f64; 2]>,
    /// 2.5% and 97.5% quantiles of each location's variance.
    pub sigma2_interval: Vec<[f64; 2]>,
}

/// Generating truth of one simulated replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    /// 1-based replicate number.
    pub replicate: usize,
    pub seed: u64,
    pub ids: Vec<String>,
    /// Labels `1..=k`.
    pub partition: Vec<usize>,
    pub beta_tilde: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub noise_sd: f64,
}

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Labels `1..=k`.
    pub z: Vec<usize>,
    /// Per-cluster coefficients in the unconstrained coordinates.
    pub beta: Vec<Vec<f64>>,
    pub sigma2: Vec<f64>,
    pub eta: Vec<f64>,
    pub loglik: Vec<f64>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// File-name stem for replicate `r` (1-based): `data_007`, `truth_007`.
pub fn replicate_name(prefix: &str, r: usize) -> String {
    format!("{prefix}_{r:03}")
}
