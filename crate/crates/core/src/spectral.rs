//! Thin SVD and the weighted singular-value proximal operator.
//!
//! Every inner iteration of the reweighted solvers reduces to one call of
//! [`weighted_sv_prox`], which solves
//!
//! ```text
//! min_X  <C, X - B> + (L/2) ||X - B||_F^2 + sum_i s_i sigma_i(X)
//! ```
//!
//! in closed form: take the SVD `U diag(d) V^T` of `B - C/L` and shrink
//! `d` to `max(d - s/L, 0)`.
//!
//! The closed form is a minimizer whenever the shrunk vector stays in
//! descending order, which is always the case for nondecreasing weights
//! (the only kind the solvers produce). For weights that reorder the
//! shrunk values the formula is still evaluated, but it is no longer
//! guaranteed to be optimal.

use nalgebra::DMatrix;
use thiserror::Error;

/// Real dense matrix, column-major under the hood.
pub type DenseMatrix = DMatrix<f64>;

/// Relative factor of the numerical-zero test for singular values.
pub const ZERO_SV_RTOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("singular value decomposition failed to produce factors")]
    DecompositionFailed,
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("proximal parameter L must be positive and finite, got {0}")]
    NonPositiveStep(f64),
    #[error("weight vector has length {found}, expected {expected}")]
    WeightLength { expected: usize, found: usize },
    #[error("weight {index} is negative or NaN ({value})")]
    NegativeWeight { index: usize, value: f64 },
}

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// `u` is `m x l`, `v` is `n x l` with `l = min(m, n)`, and `sigma` is
/// sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `U diag(values) V^T` for an arbitrary vector aligned with the columns.
    ///
    /// Columns with a zero coefficient are skipped, so low-rank outputs are cheap.
    pub fn compose(&self, values: &[f64]) -> DenseMatrix {
        assert_eq!(values.len(), self.len(), "coefficient length mismatch");
        let support: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
        let (m, n) = (self.u.nrows(), self.v.nrows());
        if support.is_empty() {
            return DenseMatrix::zeros(m, n);
        }
        let mut left = DenseMatrix::zeros(m, support.len());
        let mut right = DenseMatrix::zeros(n, support.len());
        for (col, &i) in support.iter().enumerate() {
            left.set_column(col, &(self.u.column(i) * values[i]));
            right.set_column(col, &self.v.column(i));
        }
        left * right.transpose()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.compose(&self.sigma)
    }

    /// Number of singular values above the numerical-zero threshold.
    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.sigma)
    }
}

/// Threshold below which a singular value counts as zero:
/// `1e-8 * max(sigma_1, 1)`.
pub fn zero_threshold(sigma: &[f64]) -> f64 {
    let top = sigma.iter().copied().fold(0.0_f64, f64::max);
    ZERO_SV_RTOL * top.max(1.0)
}

pub fn numerical_rank(sigma: &[f64]) -> usize {
    let thr = zero_threshold(sigma);
    sigma.iter().filter(|&&s| s > thr).count()
}

fn to_faer(a: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Computes all `min(m, n)` singular triplets of `a`.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdFactors, SpectralError> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    let (m, n) = a.shape();
    let l = m.min(n);
    if l == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(n, 0),
        });
    }
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|_| SpectralError::DecompositionFailed)?;
    let s = svd.S().column_vector();
    let sigma: Vec<f64> = (0..l).map(|i| s[i]).collect();
    if sigma.iter().any(|s| !s.is_finite()) {
        return Err(SpectralError::DecompositionFailed);
    }
    let (u, v) = (from_faer(svd.U()), from_faer(svd.V()));

    // The backend sorts already; keep the ordering contract independent of that.
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    if order.iter().enumerate().all(|(pos, &i)| pos == i) {
        return Ok(SvdFactors { u, sigma, v });
    }
    Ok(SvdFactors {
        u: u.select_columns(&order),
        sigma: order.iter().map(|&i| sigma[i]).collect(),
        v: v.select_columns(&order),
    })
}

pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>, SpectralError> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::NonFinite);
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut sigma = to_faer(a)
        .singular_values()
        .map_err(|_| SpectralError::DecompositionFailed)?;
    sigma.sort_by(|x, y| y.total_cmp(x));
    Ok(sigma)
}

/// Result of one weighted singular-value proximal step.
#[derive(Debug, Clone)]
pub struct ProxOutput {
    /// `U diag(shrunk) V^T`.
    pub x: DenseMatrix,
    /// SVD of the prox center `B - C/L`.
    pub z: SvdFactors,
    /// `max(d - s/L, 0)`, aligned with the columns of `z`. Not necessarily sorted.
    pub shrunk: Vec<f64>,
}

impl ProxOutput {
    /// Singular values of `x`, i.e. `shrunk` sorted in descending order.
    pub fn sorted_values(&self) -> Vec<f64> {
        let mut s = self.shrunk.clone();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    pub fn is_sorted(&self) -> bool {
        self.shrunk.windows(2).all(|w| w[0] >= w[1])
    }
}

fn check_same_shape(a: &DenseMatrix, b: &DenseMatrix) -> Result<(), SpectralError> {
    if a.shape() != b.shape() {
        return Err(SpectralError::ShapeMismatch {
            expected: a.shape(),
            found: b.shape(),
        });
    }
    Ok(())
}

fn check_weights(weights: &[f64], l: usize) -> Result<(), SpectralError> {
    if weights.len() != l {
        return Err(SpectralError::WeightLength {
            expected: l,
            found: weights.len(),
        });
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| w.is_nan() || **w < 0.0) {
        return Err(SpectralError::NegativeWeight { index, value });
    }
    Ok(())
}

/// The prox center `B - C/L`.
pub fn prox_center(b: &DenseMatrix, c: &DenseMatrix, step: f64) -> DenseMatrix {
    b - c / step
}

/// Closed-form minimizer of `<C, X-B> + (L/2)||X-B||_F^2 + sum_i s_i sigma_i(X)`.
///
/// Weights may be `+inf`, which zeroes the corresponding component.
pub fn weighted_sv_prox(
    b: &DenseMatrix,
    c: &DenseMatrix,
    step: f64,
    weights: &[f64],
) -> Result<ProxOutput, SpectralError> {
    check_same_shape(b, c)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(SpectralError::NonPositiveStep(step));
    }
    check_weights(weights, b.nrows().min(b.ncols()))?;

    let z = thin_svd(&prox_center(b, c, step))?;
    let shrunk: Vec<f64> = z
        .sigma
        .iter()
        .zip(weights)
        .map(|(&d, &s)| (d - s / step).max(0.0))
        .collect();
    let x = z.compose(&shrunk);
    Ok(ProxOutput { x, z, shrunk })
}

/// Objective of the weighted prox problem at `x`, pairing `s_i` with the
/// i-th largest singular value of `x`.
pub fn prox_objective(
    x: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    step: f64,
    weights: &[f64],
) -> Result<f64, SpectralError> {
    check_same_shape(b, x)?;
    check_same_shape(b, c)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(SpectralError::NonPositiveStep(step));
    }
    check_weights(weights, b.nrows().min(b.ncols()))?;
    let diff = x - b;
    let linear = c.dot(&diff);
    let quad = 0.5 * step * diff.norm_squared();
    let sigma = singular_values(x)?;
    let reg: f64 = sigma
        .iter()
        .zip(weights)
        .map(|(&sv, &w)| if sv == 0.0 { 0.0 } else { w * sv })
        .sum();
    Ok(linear + quad + reg)
}

/// `Diag(values)` as an `rows x cols` matrix.
pub fn diag_matrix(rows: usize, cols: usize, values: &[f64]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows, cols);
    for (i, &v) in values.iter().enumerate().take(rows.min(cols)) {
        out[(i, i)] = v;
    }
    out
}
