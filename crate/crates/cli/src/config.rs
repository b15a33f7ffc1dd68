//! JSON configuration files. Every field is optional in the input; the
//! resolved configuration (defaults filled in) is echoed to the output
//! directory.

use std::path::{Path, PathBuf};

use compreg_core::composition::DEFAULT_ZERO_PSEUDOCOUNT;
use compreg_core::mfm_prior::DEFAULT_SERIES_TOL;
use compreg_core::sampler::{EtaPrior, EtaUpdate, FitConfig, NigHyper};
use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Resolves a path from a config file against the config's directory.
pub fn resolve_path(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Default smoothing grid: 0 to 5 in steps of 0.5.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 0.5).collect()
}

/// Named iteration budgets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 1500 iterations, 500 burn-in.
    #[default]
    Simulation,
    /// 1000 iterations, 500 burn-in.
    Application,
}

impl Profile {
    pub fn iterations(self) -> (usize, usize) {
        match self {
            Profile::Simulation => (1500, 500),
            Profile::Application => (1000, 500),
        }
    }

    /// Default neighborhood radius: plain adjacency for simulations,
    /// graph distance 2 for applied data.
    pub fn d_max(self) -> usize {
        match self {
            Profile::Simulation => 1,
            Profile::Application => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaUpdateMode {
    #[default]
    Weighted,
    Unweighted,
}

impl From<EtaUpdateMode> for EtaUpdate {
    fn from(m: EtaUpdateMode) -> Self {
        match m {
            EtaUpdateMode::Weighted => EtaUpdate::Weighted,
            EtaUpdateMode::Unweighted => EtaUpdate::Unweighted,
        }
    }
}

/// Hyperparameter overrides; matrices are given row by row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    pub gamma: Option<f64>,
    pub zeta: Option<f64>,
    pub tau0: Option<Vec<f64>>,
    pub sigma0: Option<Vec<Vec<f64>>>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub eta0: Option<Vec<f64>>,
    pub v0: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// One or more data CSV files; each is fitted independently.
    #[serde(default)]
    pub data: Vec<PathBuf>,
    /// Edge list CSV; the bundled 51-location graph when absent.
    pub adjacency: Option<PathBuf>,
    pub d_max: Option<usize>,
    pub lambda_grid: Option<Vec<f64>>,
    pub profile: Option<Profile>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub hyper: HyperSpec,
    pub zero_pseudocount: Option<f64>,
    pub series_tol: Option<f64>,
    pub eta_update: Option<EtaUpdateMode>,
    pub threads: Option<usize>,
    /// Write one JSONL trace per chain (default true).
    pub write_traces: Option<bool>,
}

/// Fully resolved hyperparameters as echoed to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedHyper {
    pub gamma: f64,
    pub zeta: f64,
    pub tau0: Vec<f64>,
    pub sigma0: Vec<Vec<f64>>,
    pub a0: f64,
    pub b0: f64,
    pub eta0: Vec<f64>,
    pub v0: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedFit {
    pub data: Vec<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub d_max: usize,
    pub lambda_grid: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub hyper: ResolvedHyper,
    pub zero_pseudocount: f64,
    pub series_tol: f64,
    pub eta_update: EtaUpdateMode,
    pub threads: usize,
    pub write_traces: bool,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize, name: &str) -> CliResult<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::input(format!("hyper.{name}: expected a {dim} x {dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn vector(v: &[f64], dim: usize, name: &str) -> CliResult<DVector<f64>> {
    if v.len() != dim {
        return Err(CliError::input(format!("hyper.{name}: expected {dim} entries, got {}", v.len())));
    }
    Ok(DVector::from_column_slice(v))
}

impl FitSpec {
    /// Fills defaults. Hyperparameter dimensions are fixed per dataset, so
    /// vector and matrix defaults are resolved by [`ResolvedFit::fit_config`].
    pub fn resolve(&self, base: Option<&Path>, seed: Option<u64>, threads: Option<usize>) -> CliResult<ResolvedFit> {
        if self.data.is_empty() {
            return Err(CliError::input("data: at least one data file is required"));
        }
        let profile = self.profile.unwrap_or_default();
        let (mut iterations, mut burn_in) = profile.iterations();
        iterations = self.iterations.unwrap_or(iterations);
        burn_in = self.burn_in.unwrap_or(burn_in);
        if burn_in >= iterations {
            return Err(CliError::input(format!(
                "burn_in ({burn_in}) must be smaller than iterations ({iterations})"
            )));
        }
        let lambda_grid = self.lambda_grid.clone().unwrap_or_else(default_lambda_grid);
        if lambda_grid.is_empty() {
            return Err(CliError::input("lambda_grid: must not be empty"));
        }
        if let Some(l) = lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(CliError::input(format!("lambda_grid: values must be finite and >= 0, got {l}")));
        }
        let d_max = self.d_max.unwrap_or(profile.d_max());
        if d_max == 0 {
            return Err(CliError::input("d_max: must be >= 1"));
        }
        let threads = threads.or(self.threads).unwrap_or(1);
        if threads == 0 {
            return Err(CliError::input("threads: must be >= 1"));
        }
        let h = &self.hyper;
        Ok(ResolvedFit {
            data: self.data.iter().map(|p| resolve_path(base, p)).collect(),
            adjacency: self.adjacency.as_ref().map(|p| resolve_path(base, p)),
            d_max,
            lambda_grid,
            iterations,
            burn_in,
            seed: seed.or(self.seed).unwrap_or(0),
            hyper: ResolvedHyper {
                gamma: h.gamma.unwrap_or(1.0),
                zeta: h.zeta.unwrap_or(1.0),
                tau0: h.tau0.clone().unwrap_or_default(),
                sigma0: h.sigma0.clone().unwrap_or_default(),
                a0: h.a0.unwrap_or(0.01),
                b0: h.b0.unwrap_or(0.01),
                eta0: h.eta0.clone().unwrap_or_default(),
                v0: h.v0.clone().unwrap_or_default(),
            },
            zero_pseudocount: self.zero_pseudocount.unwrap_or(DEFAULT_ZERO_PSEUDOCOUNT),
            series_tol: self.series_tol.unwrap_or(DEFAULT_SERIES_TOL),
            eta_update: self.eta_update.unwrap_or_default(),
            threads,
            write_traces: self.write_traces.unwrap_or(true),
        })
    }
}

impl ResolvedFit {
    /// Sampler configuration for a dataset with `parts` parts and `p`
    /// covariates; empty hyperparameter vectors take their defaults. Also
    /// returns the hyperparameters with those defaults materialized.
    pub fn fit_config(&self, parts: usize, p: usize) -> CliResult<(FitConfig, ResolvedHyper)> {
        let d = parts - 1;
        let mut cfg = FitConfig::defaults(d, p);
        let h = &self.hyper;
        cfg.iterations = self.iterations;
        cfg.burn_in = self.burn_in;
        cfg.seed = self.seed;
        cfg.gamma = h.gamma;
        cfg.zeta = h.zeta;
        cfg.zero_pseudocount = self.zero_pseudocount;
        cfg.series_tol = self.series_tol;
        cfg.eta_update = self.eta_update.into();
        let default_nig = NigHyper::default_for(d);
        cfg.nig = NigHyper {
            tau0: if h.tau0.is_empty() { default_nig.tau0 } else { vector(&h.tau0, d, "tau0")? },
            sigma0: if h.sigma0.is_empty() { default_nig.sigma0 } else { matrix_from_rows(&h.sigma0, d, "sigma0")? },
            a0: h.a0,
            b0: h.b0,
        };
        let default_eta = EtaPrior::default_for(p);
        cfg.eta_prior = EtaPrior {
            eta0: if h.eta0.is_empty() { default_eta.eta0 } else { vector(&h.eta0, p, "eta0")? },
            v0: if h.v0.is_empty() { default_eta.v0 } else { matrix_from_rows(&h.v0, p, "v0")? },
        };
        cfg.validate().map_err(|e| CliError::input(format!("configuration: {e}")))?;
        cfg.mfm_hyper(1).map_err(|e| CliError::input(format!("configuration: {e}")))?;
        let resolved = ResolvedHyper {
            gamma: cfg.gamma,
            zeta: cfg.zeta,
            tau0: cfg.nig.tau0.iter().copied().collect(),
            sigma0: matrix_rows(&cfg.nig.sigma0),
            a0: cfg.nig.a0,
            b0: cfg.nig.b0,
            eta0: cfg.eta_prior.eta0.iter().copied().collect(),
            v0: matrix_rows(&cfg.eta_prior.v0),
        };
        Ok((cfg, resolved))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    /// `setting1` or `setting2`.
    pub setting: Option<String>,
    /// A bundled partition name (`disjoint`, `contiguous`) or a partition CSV.
    pub partition: Option<String>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub beta_tilde: Option<Vec<Vec<f64>>>,
    pub dirichlet_alpha: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub x2_range: Option<(f64, f64)>,
    pub noise_sd: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSpec {
    /// Output directory of `fit`.
    pub fits: Option<PathBuf>,
    /// Output directory of `simulate`.
    pub truth: Option<PathBuf>,
}
