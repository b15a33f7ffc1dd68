//! Mixture-of-finite-mixtures partition prior and its MRF-tilted urn scheme.
//!
//! With `K - 1 ~ Poisson(zeta)` and symmetric `Dirichlet(gamma)` weights, the
//! induced prior on a partition of `n` items into `t` blocks is
//!
//! ```text
//! p(C) = V_n(t) * prod_c gamma^(|c|)
//! V_n(t) = sum_{k >= t} k_(t) / (gamma k)^(n) * p(k)
//! ```
//!
//! where `x^(m)` is the rising and `k_(m)` the falling factorial. Everything is
//! carried in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ln_falling, ln_gamma, ln_rising, LogSumExp};
use crate::spatial_graph::SpatialGraph;

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
const MAX_SERIES_TERMS: usize = 1_000_000;
const CONSECUTIVE_SMALL_TERMS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfmHyper {
    /// Dirichlet concentration.
    pub gamma: f64,
    /// Poisson rate of `K - 1`.
    pub zeta: f64,
    /// Number of items being partitioned.
    pub n: usize,
}

impl MfmHyper {
    pub fn new(gamma: f64, zeta: f64, n: usize) -> Result<Self> {
        let h = Self { gamma, zeta, n };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidParameter(format!("zeta must be > 0, got {}", self.zeta)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        Ok(())
    }

    /// `log p(k)` for the Poisson(zeta) law shifted onto `k >= 1`.
    fn ln_prior_k(&self, k: usize) -> f64 {
        let km1 = (k - 1) as f64;
        -self.zeta + km1 * self.zeta.ln() - ln_gamma(km1 + 1.0)
    }
}

/// `log V_n(w)` for `w = 1..=n+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VnTable {
    log_v: Vec<f64>,
    gamma: f64,
    n: usize,
    tol: f64,
}

impl VnTable {
    pub fn build(h: &MfmHyper, tol: f64) -> Result<Self> {
        h.validate()?;
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("series tolerance must be > 0, got {tol}")));
        }
        let log_v = (1..=h.n + 1)
            .map(|w| log_vn(h, w, tol))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            log_v,
            gamma: h.gamma,
            n: h.n,
            tol,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `log V_n(w)` for `1 <= w <= n + 1`.
    pub fn log_v(&self, w: usize) -> f64 {
        assert!(w >= 1 && w <= self.n + 1, "V_n({w}) outside table 1..={}", self.n + 1);
        self.log_v[w - 1]
    }

    pub fn entries(&self) -> &[f64] {
        &self.log_v
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.log_v.windows(2).all(|w| w[1] < w[0])
    }

    /// Log urn mass of opening a new block when `k_star` blocks are occupied:
    /// `log gamma + log V_n(k_star + 1) - log V_n(k_star)`. With no occupied
    /// block the new block is the only option and its mass is `log gamma`.
    pub fn new_cluster_log_weight(&self, k_star: usize) -> f64 {
        let base = self.gamma.ln();
        if k_star == 0 {
            base
        } else {
            base + self.log_v(k_star + 1) - self.log_v(k_star)
        }
    }
}

/// Log urn mass of joining an occupied block of `size` items that holds
/// `matching_neighbors` graph neighbors of the incoming item.
pub fn existing_cluster_log_weight(size: usize, matching_neighbors: usize, gamma: f64, lambda: f64) -> f64 {
    let mrf = if lambda == 0.0 {
        0.0
    } else {
        lambda * matching_neighbors as f64
    };
    (size as f64 + gamma).ln() + mrf
}

fn log_vn(h: &MfmHyper, w: usize, tol: f64) -> Result<f64> {
    let ln_tol = tol.ln();
    let mut acc = LogSumExp::default();
    let mut small = 0;
    for k in w.max(1)..w.max(1) + MAX_SERIES_TERMS {
        let term = ln_falling(k, w) - ln_rising(h.gamma * k as f64, h.n) + h.ln_prior_k(k);
        acc.push(term);
        if term - acc.value() < ln_tol {
            small += 1;
            if small >= CONSECUTIVE_SMALL_TERMS {
                return Ok(acc.value());
            }
        } else {
            small = 0;
        }
    }
    Err(Error::SeriesNotConverged {
        w,
        terms: MAX_SERIES_TERMS,
    })
}

/// Block sizes of a labelling, in order of first appearance.
pub fn block_sizes(z: &[usize]) -> Vec<usize> {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for &label in z {
        match seen.iter_mut().find(|(l, _)| *l == label) {
            Some((_, c)) => *c += 1,
            None => seen.push((label, 1)),
        }
    }
    seen.into_iter().map(|(_, c)| c).collect()
}

/// `log[V_n(t) prod_c gamma^(|c|)]`, the exchangeable MFM partition probability.
pub fn partition_log_prior(z: &[usize], h: &MfmHyper, vn: &VnTable) -> Result<f64> {
    if z.len() != vn.n() {
        return Err(Error::DimensionMismatch {
            expected: vn.n(),
            actual: z.len(),
            context: "partition length",
        });
    }
    let sizes = block_sizes(z);
    Ok(vn.log_v(sizes.len()) + sizes.iter().map(|&s| ln_rising(h.gamma, s)).sum::<f64>())
}

/// Unnormalized log urn weights for placing one item.
#[derive(Clone, Debug, PartialEq)]
pub struct UrnWeights {
    /// `(label, log weight)` per occupied block, ascending by label.
    pub existing: Vec<(usize, f64)>,
    pub new_cluster: f64,
}

impl UrnWeights {
    /// Normalized probabilities: existing blocks in order, then the new block.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut logs: Vec<f64> = self.existing.iter().map(|(_, w)| *w).collect();
        logs.push(self.new_cluster);
        let norm = crate::numeric::log_sum_exp(&logs);
        logs.iter().map(|w| (w - norm).exp()).collect()
    }
}

/// Urn weights for item `i` given the labels of the other items.
///
/// `z[j] = None` marks an item that is not currently allocated (it is ignored
/// both for block sizes and for neighbor matches); `z[i]` itself is ignored.
pub fn urn_log_weights(
    i: usize,
    z: &[Option<usize>],
    graph: &SpatialGraph,
    lambda: f64,
    h: &MfmHyper,
    vn: &VnTable,
) -> Result<UrnWeights> {
    if z.len() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            actual: z.len(),
            context: "label vector length",
        });
    }
    if i >= z.len() {
        return Err(Error::IndexOutOfRange { index: i, len: z.len() });
    }
    let mut sizes: Vec<(usize, usize, usize)> = Vec::new(); // (label, size, matches)
    for (j, label) in z.iter().enumerate() {
        let Some(label) = *label else { continue };
        if j == i {
            continue;
        }
        let pos = match sizes.binary_search_by_key(&label, |e| e.0) {
            Ok(p) => p,
            Err(p) => {
                sizes.insert(p, (label, 0, 0));
                p
            }
        };
        sizes[pos].1 += 1;
    }
    for &l in graph.neighbors(i) {
        if let Some(label) = z[l] {
            if let Ok(p) = sizes.binary_search_by_key(&label, |e| e.0) {
                sizes[p].2 += 1;
            }
        }
    }
    let existing = sizes
        .iter()
        .map(|&(label, size, matches)| (label, existing_cluster_log_weight(size, matches, h.gamma, lambda)))
        .collect();
    Ok(UrnWeights {
        existing,
        new_cluster: vn.new_cluster_log_weight(sizes.len()),
    })
}
