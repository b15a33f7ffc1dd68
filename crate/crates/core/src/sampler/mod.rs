//! Collapsed Gibbs sampler for the spatially clustered log-contrast model.
//!
//! ```text
//! y_i ~ N(x1_i . beta_{z_i} + x2_i . eta, sigma2_{z_i})
//! eta ~ N(eta0, V0)
//! (beta_k, sigma2_k) ~ NIG(tau0, Sigma0, a0, b0)
//! z ~ MFM(gamma, zeta) tilted by exp(lambda * #{graph edges inside blocks})
//! ```
//!
//! One iteration updates every label in ascending observation order, then
//! every cluster's `(beta, sigma2)` in label order, then `eta`.

mod gibbs;
pub mod nig;

use nalgebra::DVector;

use crate::composition::{LogContrastDesign, DEFAULT_ZERO_PSEUDOCOUNT};
use crate::error::{Error, Result};
use crate::mfm_prior::{MfmHyper, VnTable, DEFAULT_SERIES_TOL};
use crate::seed::{chain_rng, ChainRng};
use crate::spatial_graph::SpatialGraph;

pub use gibbs::GibbsSampler;
pub use nig::{
    cluster_posterior, loglik_existing, logmarg_new, EtaPrior, GaussianConditional, NigHyper, NigParams,
    NigPrior,
};

/// How observations enter the full conditional of `eta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EtaUpdate {
    /// Each observation's contribution is scaled by `1 / sigma2_{z_i}`.
    #[default]
    Weighted,
    /// Contributions are not scaled by the cluster variances.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub lambda: f64,
    pub seed: u64,
    pub gamma: f64,
    pub zeta: f64,
    pub nig: NigHyper,
    pub eta_prior: EtaPrior,
    pub zero_pseudocount: f64,
    pub series_tol: f64,
    pub eta_update: EtaUpdate,
}

impl FitConfig {
    /// Default hyperparameters for a `beta_dim`-dimensional cluster coefficient
    /// and `p` global covariates; 1500 iterations with 500 burn-in.
    pub fn defaults(beta_dim: usize, p: usize) -> Self {
        Self {
            iterations: 1500,
            burn_in: 500,
            lambda: 0.0,
            seed: 0,
            gamma: 1.0,
            zeta: 1.0,
            nig: NigHyper::default_for(beta_dim),
            eta_prior: EtaPrior::default_for(p),
            zero_pseudocount: DEFAULT_ZERO_PSEUDOCOUNT,
            series_tol: DEFAULT_SERIES_TOL,
            eta_update: EtaUpdate::Weighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in ({}) must be smaller than the number of iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.zero_pseudocount > 0.0) {
            return Err(Error::InvalidParameter("zero pseudo-count must be > 0".into()));
        }
        self.nig.validate()?;
        self.eta_prior.validate()
    }

    pub fn mfm_hyper(&self, n: usize) -> Result<MfmHyper> {
        MfmHyper::new(self.gamma, self.zeta, n)
    }
}

/// Current allocation and parameters of a chain.
///
/// Labels are 0-based: every label lies in `0..k_star()` and every cluster is
/// nonempty.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterState {
    pub labels: Vec<usize>,
    pub betas: Vec<DVector<f64>>,
    pub sigma2s: Vec<f64>,
    pub eta: DVector<f64>,
}

impl ClusterState {
    pub fn k_star(&self) -> usize {
        self.betas.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_star()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Checks the compact-label and positivity invariants.
    pub fn check(&self) -> Result<()> {
        let k = self.k_star();
        if self.sigma2s.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: self.sigma2s.len(),
                context: "cluster variance count",
            });
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= k) {
            return Err(Error::IndexOutOfRange { index: l, len: k });
        }
        if self.cluster_sizes().contains(&0) {
            return Err(Error::InvalidParameter("empty cluster in state".into()));
        }
        if let Some(s) = self.sigma2s.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::InvalidParameter(format!("non-positive cluster variance {s}")));
        }
        Ok(())
    }

    /// Relabels clusters in order of first appearance.
    pub fn canonicalize(&mut self) {
        let k = self.k_star();
        let mut map = vec![usize::MAX; k];
        let mut next = 0;
        for l in &mut self.labels {
            if map[*l] == usize::MAX {
                map[*l] = next;
                next += 1;
            }
            *l = map[*l];
        }
        if map.iter().enumerate().all(|(i, &m)| i == m) {
            return;
        }
        let mut betas = vec![DVector::zeros(0); k];
        let mut sigma2s = vec![0.0; k];
        for (old, &new) in map.iter().enumerate() {
            betas[new] = std::mem::replace(&mut self.betas[old], DVector::zeros(0));
            sigma2s[new] = self.sigma2s[old];
        }
        self.betas = betas;
        self.sigma2s = sigma2s;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub state: ClusterState,
}

/// Post-burn-in draws of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub config: FitConfig,
    pub snapshots: Vec<Snapshot>,
    /// `loglik[m][i] = log N(y_i | theta^{(m)}_{z_i})`.
    pub loglik: Vec<Vec<f64>>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn label_draws(&self) -> Vec<&[usize]> {
        self.snapshots.iter().map(|s| s.state.labels.as_slice()).collect()
    }
}

/// Runs a chain seeded from `cfg.seed`.
pub fn run_chain(design: &LogContrastDesign, graph: &SpatialGraph, cfg: &FitConfig) -> Result<ChainTrace> {
    let vn = VnTable::build(&cfg.mfm_hyper(design.n())?, cfg.series_tol)?;
    run_chain_with_table(design, graph, cfg, &vn, &mut chain_rng(cfg.seed))
}

/// Runs a chain with a prebuilt `V_n` table and an explicit generator.
///
/// Draw order: the initial `(beta, sigma2)` from the prior, then per iteration
/// the label sweep, the cluster sweep and the `eta` draw.
pub fn run_chain_with_table(
    design: &LogContrastDesign,
    graph: &SpatialGraph,
    cfg: &FitConfig,
    vn: &VnTable,
    rng: &mut ChainRng,
) -> Result<ChainTrace> {
    cfg.validate()?;
    let sampler = GibbsSampler::new(design, graph, cfg, vn)?;
    let mut state = sampler.initial_state(rng);
    let keep = cfg.iterations - cfg.burn_in;
    let mut snapshots = Vec::with_capacity(keep);
    let mut loglik = Vec::with_capacity(keep);
    for iteration in 0..cfg.iterations {
        sampler
            .sweep(&mut state, rng)
            .map_err(|e| Error::AtIteration {
                iteration,
                source: Box::new(e),
            })?;
        if iteration >= cfg.burn_in {
            loglik.push(sampler.observation_logliks(&state));
            snapshots.push(Snapshot {
                iteration,
                state: state.clone(),
            });
        }
    }
    Ok(ChainTrace {
        config: cfg.clone(),
        snapshots,
        loglik,
    })
}
