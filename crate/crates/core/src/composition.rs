//! Compositional covariates and the log-contrast reparameterization.
//!
//! A composition row `x` on the simplex is mapped to `z = ln x`. The
//! log-contrast coefficients `beta_tilde` satisfy `sum(beta_tilde) = 0`; writing
//! `beta = H beta_tilde` with the Helmert sub-matrix `H` and
//! `beta_tilde = M1 beta` turns the constrained regression `z . beta_tilde` into
//! the unconstrained regression `x1 . beta` with `x1 = z M1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Rows whose sums differ from one by more than this are rejected.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_ZERO_PSEUDOCOUNT: f64 = 1e-5;

/// `n x K` matrix of proportions, every row on the simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
}

impl CompositionMatrix {
    /// Validates rows that are already (approximately) normalized. Rows within
    /// [`ROW_SUM_TOLERANCE`] of one are renormalized exactly.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        Self::build(values, Some(ROW_SUM_TOLERANCE))
    }

    /// Closes arbitrary nonnegative rows onto the simplex.
    pub fn from_unnormalized(values: DMatrix<f64>) -> Result<Self> {
        Self::build(values, None)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(Error::InvalidComposition {
                row: i,
                reason: format!("expected {k} parts, found {}", r.len()),
            });
        }
        Self::new(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
    }

    fn build(mut values: DMatrix<f64>, tolerance: Option<f64>) -> Result<Self> {
        if values.nrows() < 1 {
            return Err(Error::InvalidDimension("composition needs at least one row".into()));
        }
        if values.ncols() < 2 {
            return Err(Error::InvalidDimension(format!(
                "composition needs at least 2 parts, got {}",
                values.ncols()
            )));
        }
        for (i, mut row) in values.row_iter_mut().enumerate() {
            if let Some(j) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidComposition {
                    row: i,
                    reason: format!("part {} is {} (must be finite and nonnegative)", j + 1, row[j]),
                });
            }
            let sum = row.sum();
            let bad_sum = match tolerance {
                Some(tol) => (sum - 1.0).abs() > tol,
                None => sum <= 0.0,
            };
            if bad_sum {
                return Err(Error::InvalidComposition {
                    row: i,
                    reason: format!("row sums to {sum}"),
                });
            }
            row /= sum;
        }
        Ok(Self { values })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn parts(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Helmert sub-matrix `h` and the matching inverse projection `m1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HelmertProjection {
    pub h: DMatrix<f64>,
    pub m1: DMatrix<f64>,
}

impl HelmertProjection {
    pub fn new(parts: usize) -> Result<Self> {
        let h = helmert_submatrix(parts)?;
        let m1 = inverse_projection(&h)?;
        Ok(Self { h, m1 })
    }

    pub fn parts(&self) -> usize {
        self.h.ncols()
    }

    /// `beta = H beta_tilde`.
    pub fn project(&self, beta_tilde: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(beta_tilde.len(), self.h.ncols(), "constrained coefficient length")?;
        Ok(&self.h * beta_tilde)
    }

    pub fn recover(&self, beta: &DVector<f64>) -> Result<ConstrainedCoefficients> {
        recover_constrained(beta, &self.m1)
    }
}

/// Orthonormal `(K-1) x K` Helmert sub-matrix. Row `j` (1-based) holds `j`
/// copies of `1/sqrt(j(j+1))`, then `-j/sqrt(j(j+1))`, then zeros.
pub fn helmert_submatrix(parts: usize) -> Result<DMatrix<f64>> {
    if parts < 2 {
        return Err(Error::InvalidDimension(format!(
            "Helmert matrix needs K >= 2, got {parts}"
        )));
    }
    Ok(DMatrix::from_fn(parts - 1, parts, |r, c| {
        let j = (r + 1) as f64;
        let scale = (j * (j + 1.0)).sqrt();
        if c <= r {
            1.0 / scale
        } else if c == r + 1 {
            -j / scale
        } else {
            0.0
        }
    }))
}

/// Inverse projection `M1` for a full-row-rank `(K-1) x K` matrix `h`.
///
/// Uses the full-rank decomposition `h = F Q` with `F = I`, `Q = h`, completes
/// `Q` with a unit vector spanning its orthogonal complement and returns the
/// first `K-1` columns of the inverse of the completed `K x K` matrix. For the
/// orthonormal Helmert sub-matrix this equals `h^T`.
pub fn inverse_projection(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (r, k) = h.shape();
    if k < 2 || r + 1 != k {
        return Err(Error::InvalidDimension(format!(
            "expected a (K-1) x K matrix, got {r} x {k}"
        )));
    }
    let gram = h.transpose() * h;
    let eig = SymmetricEigen::new(gram);
    let max_ev = eig.eigenvalues.amax();
    let tol = max_ev * 1e-12 * k as f64;
    let rank = eig.eigenvalues.iter().filter(|&&v| v > tol).count();
    if max_ev <= 0.0 || rank < r {
        return Err(Error::InvalidDimension(format!(
            "matrix has rank {rank}, full row rank {r} required"
        )));
    }
    let null_idx = eig.eigenvalues.imin();
    let complement = eig.eigenvectors.column(null_idx).into_owned();

    let mut m = DMatrix::zeros(k, k);
    m.rows_mut(0, r).copy_from(h);
    m.row_mut(r).copy_from(&complement.transpose());
    let inv = m.try_inverse().ok_or_else(|| {
        Error::InvalidDimension("completed projection matrix is singular".into())
    })?;
    Ok(inv.columns(0, r).into_owned())
}

/// Replaces zeros by `zero_pseudocount`, recloses each row and takes the
/// element-wise natural log.
pub fn log_transform(x: &CompositionMatrix, zero_pseudocount: f64) -> Result<DMatrix<f64>> {
    if !(zero_pseudocount > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "zero pseudo-count must be positive, got {zero_pseudocount}"
        )));
    }
    let mut z = x.values.clone();
    for mut row in z.row_iter_mut() {
        if row.iter().any(|v| *v == 0.0) {
            row.apply(|v| {
                if *v == 0.0 {
                    *v = zero_pseudocount
                }
            });
            let s = row.sum();
            row /= s;
        }
        row.apply(|v| *v = v.ln());
    }
    Ok(z)
}

/// Log-contrast coefficients, summing to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedCoefficients {
    pub beta_tilde: DVector<f64>,
}

impl ConstrainedCoefficients {
    pub fn sum(&self) -> f64 {
        self.beta_tilde.sum()
    }
}

/// `beta_tilde = m1 beta`.
pub fn recover_constrained(beta: &DVector<f64>, m1: &DMatrix<f64>) -> Result<ConstrainedCoefficients> {
    check_len(beta.len(), m1.ncols(), "unconstrained coefficient length")?;
    Ok(ConstrainedCoefficients {
        beta_tilde: m1 * beta,
    })
}

/// Design matrices of the unconstrained regression `y = x1 beta + x2 eta + e`.
#[derive(Clone, Debug)]
pub struct LogContrastDesign {
    pub z: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub y: DVector<f64>,
    pub projection: HelmertProjection,
}

impl LogContrastDesign {
    pub fn new(
        composition: &CompositionMatrix,
        x2: DMatrix<f64>,
        y: DVector<f64>,
        zero_pseudocount: f64,
    ) -> Result<Self> {
        let n = composition.rows();
        check_len(y.len(), n, "response length")?;
        check_len(x2.nrows(), n, "covariate rows")?;
        if let Some(v) = y.iter().chain(x2.iter()).find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite data value {v}")));
        }
        let projection = HelmertProjection::new(composition.parts())?;
        let z = log_transform(composition, zero_pseudocount)?;
        let x1 = &z * &projection.m1;
        Ok(Self {
            z,
            x1,
            x2,
            y,
            projection,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of compositional parts `K`.
    pub fn parts(&self) -> usize {
        self.z.ncols()
    }

    /// Dimension of the unconstrained coefficient, `K - 1`.
    pub fn beta_dim(&self) -> usize {
        self.x1.ncols()
    }

    pub fn p(&self) -> usize {
        self.x2.ncols()
    }
}

fn check_len(actual: usize, expected: usize, context: &'static str) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        })
    }
}
