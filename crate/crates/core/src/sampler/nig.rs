//! Normal-inverse-gamma conjugate algebra for the cluster-wise regression and
//! the Gaussian full conditional of the global coefficients.
//!
//! `NIG(tau, Sigma, a, b)` means `sigma2 ~ InvGamma(a, b)` and
//! `beta | sigma2 ~ N(tau, sigma2 * Sigma)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{chol_log_det, cholesky, is_symmetric, ln_gamma, solve_upper_transpose, LN_2PI};

/// Base-measure hyperparameters of the cluster-wise `(beta, sigma2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NigHyper {
    pub tau0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub a0: f64,
    pub b0: f64,
}

impl NigHyper {
    /// `tau0 = 0`, `Sigma0 = I`, `a0 = b0 = 0.01`.
    pub fn default_for(dim: usize) -> Self {
        Self {
            tau0: DVector::zeros(dim),
            sigma0: DMatrix::identity(dim, dim),
            a0: 0.01,
            b0: 0.01,
        }
    }

    pub fn dim(&self) -> usize {
        self.tau0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.sigma0.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: self.sigma0.nrows(),
                context: "Sigma0 dimension",
            });
        }
        if !(self.a0 > 0.0 && self.b0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "a0 and b0 must be positive, got a0={} b0={}",
                self.a0, self.b0
            )));
        }
        if !is_symmetric(&self.sigma0, 1e-12) {
            return Err(Error::NotPositiveDefinite("Sigma0 is not symmetric"));
        }
        cholesky(&self.sigma0, "Sigma0")?;
        Ok(())
    }
}

/// Gaussian prior on the global coefficients `eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaPrior {
    pub eta0: DVector<f64>,
    pub v0: DMatrix<f64>,
}

impl EtaPrior {
    /// `eta0 = 0`, `V0 = 100 I`.
    pub fn default_for(p: usize) -> Self {
        Self {
            eta0: DVector::zeros(p),
            v0: DMatrix::identity(p, p) * 100.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.eta0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.v0.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: self.v0.nrows(),
                context: "V0 dimension",
            });
        }
        if !is_symmetric(&self.v0, 1e-12) {
            return Err(Error::NotPositiveDefinite("V0 is not symmetric"));
        }
        if p > 0 {
            cholesky(&self.v0, "V0")?;
        }
        Ok(())
    }
}

/// Quantities of the NIG prior that never change during a chain.
#[derive(Clone, Debug)]
pub struct NigPrior {
    pub hyper: NigHyper,
    pub sigma0_inv: DMatrix<f64>,
    /// `Sigma0^{-1} tau0`
    pub prec_tau0: DVector<f64>,
    /// `tau0' Sigma0^{-1} tau0`
    pub quad0: f64,
    pub log_det_sigma0: f64,
    /// Constant part of the single-observation marginal.
    ln_marg_const: f64,
}

impl NigPrior {
    pub fn new(hyper: &NigHyper) -> Result<Self> {
        hyper.validate()?;
        let chol = cholesky(&hyper.sigma0, "Sigma0")?;
        let sigma0_inv = chol.inverse();
        let prec_tau0 = chol.solve(&hyper.tau0);
        let quad0 = hyper.tau0.dot(&prec_tau0);
        let (a0, b0) = (hyper.a0, hyper.b0);
        Ok(Self {
            hyper: hyper.clone(),
            sigma0_inv,
            prec_tau0,
            quad0,
            log_det_sigma0: chol_log_det(&chol),
            ln_marg_const: a0 * b0.ln() + ln_gamma(a0 + 0.5) - ln_gamma(a0) - 0.5 * LN_2PI,
        })
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    /// The prior itself as NIG parameters.
    pub fn as_params(&self) -> NigParams {
        NigParams::from_precision(
            self.hyper.tau0.clone(),
            self.sigma0_inv.clone(),
            self.hyper.a0,
            self.hyper.b0,
        )
        .expect("validated prior")
    }

    /// `x' Sigma0 x` and `x' tau0`, the per-observation constants of the
    /// single-observation marginal.
    pub fn observation_constants(&self, x1: &[f64]) -> (f64, f64) {
        let d = x1.len();
        let mut s = 0.0;
        let mut m = 0.0;
        for a in 0..d {
            m += x1[a] * self.hyper.tau0[a];
            for b in 0..d {
                s += x1[a] * self.hyper.sigma0[(a, b)] * x1[b];
            }
        }
        (s, m)
    }

    /// Log marginal of a single residual `r = y - x2 . eta` whose observation
    /// constants are `(s, m)`.
    ///
    /// The rank-one update `Sigma = (Sigma0^{-1} + x x')^{-1}` gives
    /// `|Sigma| / |Sigma0| = 1 / (1 + s)` and
    /// `tau0' Sigma0^{-1} tau0 + r^2 - tau' Sigma^{-1} tau = (r - m)^2 / (1 + s)`.
    pub fn log_marginal_single(&self, r: f64, s: f64, m: f64) -> f64 {
        let a0 = self.hyper.a0;
        let b1 = self.hyper.b0 + 0.5 * (r - m).powi(2) / (1.0 + s);
        self.ln_marg_const - 0.5 * (1.0 + s).ln() - (a0 + 0.5) * b1.ln()
    }
}

/// Parameters of an NIG law with its precision factorization.
#[derive(Clone, Debug)]
pub struct NigParams {
    pub tau: DVector<f64>,
    /// `Sigma^{-1}`
    pub precision: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    chol: Cholesky<f64, Dyn>,
}

impl NigParams {
    pub fn from_precision(tau: DVector<f64>, precision: DMatrix<f64>, a: f64, b: f64) -> Result<Self> {
        let chol = cholesky(&precision, "NIG precision")?;
        Ok(Self {
            tau,
            precision,
            a,
            b,
            chol,
        })
    }

    /// `Sigma = precision^{-1}`.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn log_density(&self, beta: &DVector<f64>, sigma2: f64) -> f64 {
        if sigma2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let d = self.tau.len() as f64;
        let diff = beta - &self.tau;
        let quad = diff.dot(&(&self.precision * &diff));
        let ln_s2 = sigma2.ln();
        -0.5 * d * (LN_2PI + ln_s2) + 0.5 * chol_log_det(&self.chol) - quad / (2.0 * sigma2)
            + self.a * self.b.ln()
            - ln_gamma(self.a)
            - (self.a + 1.0) * ln_s2
            - self.b / sigma2
    }

    /// Draws `sigma2` (one gamma variate) and then `beta` (`d` standard normals).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let gamma = Gamma::new(self.a, 1.0 / self.b).expect("positive shape and rate");
        let sigma2 = 1.0 / gamma.sample(rng);
        let eps = DVector::from_fn(self.tau.len(), |_, _| StandardNormal.sample(rng));
        let beta = &self.tau + solve_upper_transpose(&self.chol, &eps) * sigma2.sqrt();
        (beta, sigma2)
    }
}

/// `log N(y | x1 . beta + x2 . eta, sigma2)`.
pub fn loglik_existing(
    y: f64,
    x1: &[f64],
    x2: &[f64],
    beta: &DVector<f64>,
    sigma2: f64,
    eta: &DVector<f64>,
) -> f64 {
    let mean = dot(x1, beta.as_slice()) + dot(x2, eta.as_slice());
    normal_log_density(y - mean, sigma2)
}

pub(crate) fn normal_log_density(residual: f64, sigma2: f64) -> f64 {
    -0.5 * (LN_2PI + sigma2.ln()) - residual * residual / (2.0 * sigma2)
}

/// Log marginal likelihood of one observation under the NIG base measure with
/// `eta` held fixed.
pub fn logmarg_new(y: f64, x1: &[f64], x2: &[f64], eta: &DVector<f64>, hyper: &NigHyper) -> Result<f64> {
    let prior = NigPrior::new(hyper)?;
    let (s, m) = prior.observation_constants(x1);
    Ok(prior.log_marginal_single(y - dot(x2, eta.as_slice()), s, m))
}

/// NIG posterior of a cluster from its observations' `x1` rows and residuals
/// `r_i = y_i - x2_i . eta`.
pub fn cluster_posterior<'a, I>(prior: &NigPrior, obs: I) -> Result<NigParams>
where
    I: IntoIterator<Item = (&'a [f64], f64)> + Clone,
{
    let d = prior.dim();
    let mut precision = prior.sigma0_inv.clone();
    let mut rhs = prior.prec_tau0.clone();
    let mut count = 0usize;
    for (x, r) in obs.clone() {
        for a in 0..d {
            rhs[a] += x[a] * r;
            for b in 0..d {
                precision[(a, b)] += x[a] * x[b];
            }
        }
        count += 1;
    }
    let chol = cholesky(&precision, "cluster posterior precision")?;
    let tau = chol.solve(&rhs);
    // b* in sum-of-squares form: b0 + (|r - X tau*|^2 + (tau* - tau0)' Sigma0^{-1} (tau* - tau0)) / 2,
    // algebraically equal to b0 + (tau0' Sigma0^{-1} tau0 + |r|^2 - tau*' Sigma*^{-1} tau*) / 2
    let mut ss = 0.0;
    for (x, r) in obs {
        let e = r - dot(x, tau.as_slice());
        ss += e * e;
    }
    let shift = &tau - &prior.hyper.tau0;
    ss += shift.dot(&(&prior.sigma0_inv * &shift));
    let b = prior.hyper.b0 + 0.5 * ss;
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::NonPositiveRate { b_star: b, size: count });
    }
    Ok(NigParams {
        tau,
        precision,
        a: prior.hyper.a0 + 0.5 * count as f64,
        b,
        chol,
    })
}

/// Gaussian law stored as mean and precision factor.
#[derive(Clone, Debug)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianConditional {
    pub fn from_precision(precision: DMatrix<f64>, rhs: &DVector<f64>) -> Result<Self> {
        let chol = cholesky(&precision, "eta precision")?;
        let mean = chol.solve(rhs);
        Ok(Self { mean, precision, chol })
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let quad = diff.dot(&(&self.precision * &diff));
        -0.5 * (self.mean.len() as f64 * LN_2PI - chol_log_det(&self.chol) + quad)
    }

    /// Draws `p` standard normals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let eps = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        &self.mean + solve_upper_transpose(&self.chol, &eps)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
