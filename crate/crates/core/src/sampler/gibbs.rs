use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::nig::{cluster_posterior, dot, normal_log_density, GaussianConditional, NigPrior};
use super::{ClusterState, EtaUpdate, FitConfig};
use crate::composition::LogContrastDesign;
use crate::error::{Error, Result};
use crate::mfm_prior::{existing_cluster_log_weight, VnTable};
use crate::numeric::{cholesky, sample_log_categorical};
use crate::spatial_graph::SpatialGraph;

const UNASSIGNED: usize = usize::MAX;

/// One chain's fixed ingredients: data, graph, priors and cached constants.
pub struct GibbsSampler<'a> {
    design: &'a LogContrastDesign,
    graph: &'a SpatialGraph,
    vn: &'a VnTable,
    lambda: f64,
    gamma: f64,
    nig: NigPrior,
    v0_inv: DMatrix<f64>,
    v0_inv_eta0: DVector<f64>,
    eta0: DVector<f64>,
    eta_update: EtaUpdate,
    /// Row-major copies of x1 and x2.
    x1: Vec<Vec<f64>>,
    x2: Vec<Vec<f64>>,
    /// `(x1_i' Sigma0 x1_i, x1_i' tau0)`
    obs_consts: Vec<(f64, f64)>,
}

impl<'a> GibbsSampler<'a> {
    pub fn new(
        design: &'a LogContrastDesign,
        graph: &'a SpatialGraph,
        cfg: &FitConfig,
        vn: &'a VnTable,
    ) -> Result<Self> {
        let n = design.n();
        if graph.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: graph.len(),
                context: "graph vertex count",
            });
        }
        if vn.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: vn.n(),
                context: "V_n table sample size",
            });
        }
        if cfg.nig.dim() != design.beta_dim() {
            return Err(Error::DimensionMismatch {
                expected: design.beta_dim(),
                actual: cfg.nig.dim(),
                context: "tau0 length",
            });
        }
        if cfg.eta_prior.dim() != design.p() {
            return Err(Error::DimensionMismatch {
                expected: design.p(),
                actual: cfg.eta_prior.dim(),
                context: "eta0 length",
            });
        }
        let nig = NigPrior::new(&cfg.nig)?;
        cfg.eta_prior.validate()?;
        let (v0_inv, v0_inv_eta0) = if design.p() > 0 {
            let chol = cholesky(&cfg.eta_prior.v0, "V0")?;
            (chol.inverse(), chol.solve(&cfg.eta_prior.eta0))
        } else {
            (DMatrix::zeros(0, 0), DVector::zeros(0))
        };
        let x1: Vec<Vec<f64>> = design.x1.row_iter().map(|r| r.iter().copied().collect()).collect();
        let x2: Vec<Vec<f64>> = design.x2.row_iter().map(|r| r.iter().copied().collect()).collect();
        let obs_consts = x1.iter().map(|x| nig.observation_constants(x)).collect();
        Ok(Self {
            design,
            graph,
            vn,
            lambda: cfg.lambda,
            gamma: cfg.gamma,
            nig,
            v0_inv,
            v0_inv_eta0,
            eta0: cfg.eta_prior.eta0.clone(),
            eta_update: cfg.eta_update,
            x1,
            x2,
            obs_consts,
        })
    }

    pub fn nig_prior(&self) -> &NigPrior {
        &self.nig
    }

    /// Everything in one cluster with `(beta, sigma2)` drawn from the prior and
    /// `eta = eta0`.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> ClusterState {
        let (beta, sigma2) = self.nig.as_params().sample(rng);
        ClusterState {
            labels: vec![0; self.design.n()],
            betas: vec![beta],
            sigma2s: vec![sigma2],
            eta: self.eta0.clone(),
        }
    }

    /// `y_i - x2_i . eta` for every observation.
    fn residuals(&self, eta: &DVector<f64>) -> Vec<f64> {
        (0..self.design.n())
            .map(|i| self.design.y[i] - dot(&self.x2[i], eta.as_slice()))
            .collect()
    }

    /// One full iteration: labels, cluster parameters, `eta`.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ClusterState, rng: &mut R) -> Result<()> {
        self.sample_labels(state, rng)?;
        self.update_cluster_params(state, rng)?;
        self.update_eta(state, rng)
    }

    /// Reallocates every observation in ascending order.
    ///
    /// Per observation one uniform is consumed; a newborn cluster additionally
    /// consumes one gamma variate and `K - 1` normals.
    pub fn sample_labels<R: Rng + ?Sized>(&self, state: &mut ClusterState, rng: &mut R) -> Result<()> {
        let n = self.design.n();
        let resid = self.residuals(&state.eta);
        let mut sizes = state.cluster_sizes();
        let mut matches: Vec<usize> = Vec::new();
        let mut log_w: Vec<f64> = Vec::new();
        for i in 0..n {
            let old = state.labels[i];
            state.labels[i] = UNASSIGNED;
            sizes[old] -= 1;
            if sizes[old] == 0 {
                remove_cluster(state, &mut sizes, old);
            }
            let k = state.k_star();

            matches.clear();
            matches.resize(k, 0);
            if self.lambda != 0.0 {
                for &l in self.graph.neighbors(i) {
                    let z = state.labels[l];
                    if z != UNASSIGNED {
                        matches[z] += 1;
                    }
                }
            }

            log_w.clear();
            for c in 0..k {
                let prior = existing_cluster_log_weight(sizes[c], matches[c], self.gamma, self.lambda);
                let r = resid[i] - dot(&self.x1[i], state.betas[c].as_slice());
                log_w.push(prior + normal_log_density(r, state.sigma2s[c]));
            }
            let (s, m) = self.obs_consts[i];
            log_w.push(self.vn.new_cluster_log_weight(k) + self.nig.log_marginal_single(resid[i], s, m));

            let choice = sample_log_categorical(&log_w, rng);
            if choice == k {
                let post = cluster_posterior(&self.nig, [(self.x1[i].as_slice(), resid[i])])?;
                let (beta, sigma2) = post.sample(rng);
                state.betas.push(beta);
                state.sigma2s.push(sigma2);
                sizes.push(0);
            }
            state.labels[i] = choice;
            sizes[choice] += 1;
        }
        state.canonicalize();
        Ok(())
    }

    /// Draws `(beta_c, sigma2_c)` from the NIG full conditional of every cluster.
    pub fn update_cluster_params<R: Rng + ?Sized>(&self, state: &mut ClusterState, rng: &mut R) -> Result<()> {
        let resid = self.residuals(&state.eta);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); state.k_star()];
        for (i, &l) in state.labels.iter().enumerate() {
            members[l].push(i);
        }
        for (c, idx) in members.iter().enumerate() {
            let post = cluster_posterior(&self.nig, idx.iter().map(|&i| (self.x1[i].as_slice(), resid[i])))?;
            let (beta, sigma2) = post.sample(rng);
            state.betas[c] = beta;
            state.sigma2s[c] = sigma2;
        }
        Ok(())
    }

    /// Gaussian full conditional of `eta` given the allocation and cluster
    /// parameters.
    pub fn eta_conditional(&self, state: &ClusterState) -> Result<GaussianConditional> {
        let p = self.design.p();
        let mut precision = self.v0_inv.clone();
        let mut rhs = self.v0_inv_eta0.clone();
        for i in 0..self.design.n() {
            let c = state.labels[i];
            let w = match self.eta_update {
                EtaUpdate::Weighted => 1.0 / state.sigma2s[c],
                EtaUpdate::Unweighted => 1.0,
            };
            let r = self.design.y[i] - dot(&self.x1[i], state.betas[c].as_slice());
            let x = &self.x2[i];
            for a in 0..p {
                rhs[a] += w * x[a] * r;
                for b in 0..p {
                    precision[(a, b)] += w * x[a] * x[b];
                }
            }
        }
        GaussianConditional::from_precision(precision, &rhs)
    }

    /// Draws `eta` (`p` normals). No draw is made when `p = 0`.
    pub fn update_eta<R: Rng + ?Sized>(&self, state: &mut ClusterState, rng: &mut R) -> Result<()> {
        if self.design.p() == 0 {
            return Ok(());
        }
        state.eta = self.eta_conditional(state)?.sample(rng);
        Ok(())
    }

    /// `log N(y_i | x1_i . beta_{z_i} + x2_i . eta, sigma2_{z_i})` per observation.
    pub fn observation_logliks(&self, state: &ClusterState) -> Vec<f64> {
        (0..self.design.n())
            .map(|i| {
                let c = state.labels[i];
                let mean = dot(&self.x1[i], state.betas[c].as_slice()) + dot(&self.x2[i], state.eta.as_slice());
                normal_log_density(self.design.y[i] - mean, state.sigma2s[c])
            })
            .collect()
    }
}

/// Deletes empty cluster `c` by moving the last cluster into its slot.
fn remove_cluster(state: &mut ClusterState, sizes: &mut Vec<usize>, c: usize) {
    let last = state.k_star() - 1;
    if c != last {
        state.betas.swap(c, last);
        state.sigma2s.swap(c, last);
        sizes.swap(c, last);
        for l in state.labels.iter_mut() {
            if *l == last {
                *l = c;
            }
        }
    }
    state.betas.pop();
    state.sigma2s.pop();
    sizes.pop();
}
