//! Post-MCMC inference: Dahl's least-squares clustering, CPO/LPML, and the
//! clustering and estimation metrics used in simulation studies.

use nalgebra::DVector;

use crate::composition::HelmertProjection;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, quantile};
use crate::sampler::ChainTrace;

/// Co-clustering indicator matrix `b_ij = I(z_i = z_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipMatrix {
    n: usize,
    bits: Vec<bool>,
}

impl MembershipMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        self.bits.chunks(self.n.max(1)).take(self.n).map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }
}

pub fn membership_matrix(z: &[usize]) -> MembershipMatrix {
    let n = z.len();
    let bits = (0..n * n).map(|k| z[k / n] == z[k % n]).collect();
    MembershipMatrix { n, bits }
}

/// Index of the draw whose membership matrix is closest in squared Frobenius
/// distance to the mean membership matrix. Ties go to the smallest index.
pub fn dahl_select_labels(draws: &[&[usize]]) -> Result<usize> {
    let first = draws.first().ok_or(Error::EmptyTrace)?;
    let n = first.len();
    if let Some(bad) = draws.iter().find(|d| d.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: bad.len(),
            context: "draw length",
        });
    }
    let mut mean = vec![0.0f64; n * n];
    for z in draws {
        for i in 0..n {
            for j in (i + 1)..n {
                if z[i] == z[j] {
                    mean[i * n + j] += 1.0;
                }
            }
        }
    }
    let m = draws.len() as f64;
    mean.iter_mut().for_each(|v| *v /= m);

    let mut best = (0, f64::INFINITY);
    for (idx, z) in draws.iter().enumerate() {
        // the diagonal contributes zero; off-diagonal pairs count twice
        let mut dist = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let b = if z[i] == z[j] { 1.0 } else { 0.0 };
                let d = b - mean[i * n + j];
                dist += 2.0 * d * d;
            }
        }
        if dist < best.1 {
            best = (idx, dist);
        }
    }
    Ok(best.0)
}

pub fn dahl_select(trace: &ChainTrace) -> Result<usize> {
    dahl_select_labels(&trace.label_draws())
}

/// `log CPO_i = -log( mean_m exp(-loglik[m][i]) )`, computed in log space.
pub fn log_cpo(loglik: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = loglik.first().ok_or(Error::EmptyTrace)?;
    let n = first.len();
    let m = loglik.len();
    for (draw, row) in loglik.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: row.len(),
                context: "log-likelihood row length",
            });
        }
        if let Some(observation) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLikelihood { observation, draw });
        }
    }
    let ln_m = (m as f64).ln();
    let mut neg = vec![0.0; m];
    Ok((0..n)
        .map(|i| {
            for (k, row) in loglik.iter().enumerate() {
                neg[k] = -row[i];
            }
            ln_m - log_sum_exp(&neg)
        })
        .collect())
}

/// Log pseudo-marginal likelihood from a `draws x observations` matrix of
/// log-likelihoods.
pub fn lpml_from_logliks(loglik: &[Vec<f64>]) -> Result<f64> {
    Ok(log_cpo(loglik)?.iter().sum())
}

pub fn lpml(trace: &ChainTrace) -> Result<f64> {
    lpml_from_logliks(&trace.loglik)
}

/// Fraction of unordered pairs on which two partitions agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
            context: "partition length",
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidParameter("rand index needs at least 2 items".into()));
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

/// Per-coefficient estimation accuracy across replicates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientMetrics {
    pub mab: f64,
    pub msd: f64,
    pub mmse: f64,
}

/// `estimates[r][l][m]` is replicate `r`'s estimate of coefficient `m` at
/// location `l`; `truth[l][m]` the true value. Returns the coefficient count.
fn check_shapes(estimates: &[Vec<Vec<f64>>], truth: &[Vec<f64>]) -> Result<usize> {
    if estimates.is_empty() {
        return Err(Error::TooFewReplicates { needed: 1, got: 0 });
    }
    let coefs = truth.first().map_or(0, Vec::len);
    let rows = truth.iter().chain(estimates.iter().flatten());
    if let Some(row) = rows.clone().find(|r| r.len() != coefs) {
        return Err(Error::DimensionMismatch {
            expected: coefs,
            actual: row.len(),
            context: "coefficient count",
        });
    }
    if let Some(rep) = estimates.iter().find(|r| r.len() != truth.len()) {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: rep.len(),
            context: "location count",
        });
    }
    Ok(coefs)
}

fn average_over_cells(
    estimates: &[Vec<Vec<f64>>],
    truth: &[Vec<f64>],
    cell: impl Fn(&[f64], f64) -> f64,
) -> Result<Vec<f64>> {
    let coefs = check_shapes(estimates, truth)?;
    let locations = truth.len() as f64;
    Ok((0..coefs)
        .map(|m| {
            truth
                .iter()
                .enumerate()
                .map(|(l, t)| {
                    let values: Vec<f64> = estimates.iter().map(|rep| rep[l][m]).collect();
                    cell(&values, t[m])
                })
                .sum::<f64>()
                / locations
        })
        .collect())
}

/// Mean over locations of the mean absolute error across replicates.
pub fn mean_absolute_bias(estimates: &[Vec<Vec<f64>>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    average_over_cells(estimates, truth, |v, t| {
        v.iter().map(|x| (x - t).abs()).sum::<f64>() / v.len() as f64
    })
}

/// Mean over locations of the mean squared error across replicates.
pub fn mean_squared_error(estimates: &[Vec<Vec<f64>>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    average_over_cells(estimates, truth, |v, t| {
        v.iter().map(|x| (x - t).powi(2)).sum::<f64>() / v.len() as f64
    })
}

/// Mean over locations of the sample standard deviation (divisor `R - 1`).
pub fn mean_standard_deviation(estimates: &[Vec<Vec<f64>>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    if estimates.len() < 2 {
        return Err(Error::TooFewReplicates {
            needed: 2,
            got: estimates.len(),
        });
    }
    average_over_cells(estimates, truth, |v, _| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    })
}

/// MAB, MSD and MMSE per coefficient. Global coefficients are passed with a
/// single location.
pub fn estimation_metrics(estimates: &[Vec<Vec<f64>>], truth: &[Vec<f64>]) -> Result<Vec<CoefficientMetrics>> {
    let msd = mean_standard_deviation(estimates, truth)?;
    let mab = mean_absolute_bias(estimates, truth)?;
    let mmse = mean_squared_error(estimates, truth)?;
    Ok(mab
        .into_iter()
        .zip(msd)
        .zip(mmse)
        .map(|((mab, msd), mmse)| CoefficientMetrics { mab, msd, mmse })
        .collect())
}

/// Point summary of one chain, taken from the Dahl-selected draw.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    /// Position of the selected draw among the post-burn-in snapshots.
    pub m_best: usize,
    /// Iteration number of the selected draw.
    pub iteration: usize,
    /// Labels in `0..k_hat`.
    pub z_hat: Vec<usize>,
    pub k_hat: usize,
    /// Back-projected log-contrast coefficients per cluster.
    pub beta_tilde_hat: Vec<DVector<f64>>,
    pub sigma2_hat: Vec<f64>,
    pub eta_hat: DVector<f64>,
    pub lpml: f64,
    /// 2.5% and 97.5% trace quantiles of each `eta` component.
    pub eta_interval: Vec<(f64, f64)>,
    /// 2.5% and 97.5% trace quantiles of `sigma2_{z_i}` per observation.
    pub sigma2_interval: Vec<(f64, f64)>,
}

impl PosteriorSummary {
    pub fn from_trace(trace: &ChainTrace, projection: &HelmertProjection) -> Result<Self> {
        let m_best = dahl_select(trace)?;
        let lpml = lpml(trace)?;
        let snap = &trace.snapshots[m_best];
        let state = &snap.state;
        let beta_tilde_hat = state
            .betas
            .iter()
            .map(|b| projection.recover(b).map(|c| c.beta_tilde))
            .collect::<Result<Vec<_>>>()?;

        let interval = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            (quantile(&v, 0.025), quantile(&v, 0.975))
        };
        let p = state.eta.len();
        let eta_interval = (0..p)
            .map(|j| interval(trace.snapshots.iter().map(|s| s.state.eta[j]).collect()))
            .collect();
        let n = state.labels.len();
        let sigma2_interval = (0..n)
            .map(|i| {
                interval(
                    trace
                        .snapshots
                        .iter()
                        .map(|s| s.state.sigma2s[s.state.labels[i]])
                        .collect(),
                )
            })
            .collect();
        Ok(Self {
            m_best,
            iteration: snap.iteration,
            z_hat: state.labels.clone(),
            k_hat: state.k_star(),
            beta_tilde_hat,
            sigma2_hat: state.sigma2s.clone(),
            eta_hat: state.eta.clone(),
            lpml,
            eta_interval,
            sigma2_interval,
        })
    }

    /// Back-projected coefficient vector at each location.
    pub fn beta_tilde_by_location(&self) -> Vec<&DVector<f64>> {
        self.z_hat.iter().map(|&c| &self.beta_tilde_hat[c]).collect()
    }
}
