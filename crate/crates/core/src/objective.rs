//! Smooth loss functions `f` and the Schatten-p penalty.

use std::collections::HashSet;

use nalgebra::DVector;
use thiserror::Error;

use crate::spectral::{self, zero_threshold, DenseMatrix, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("exponent p must lie in (0, 1), got {0}")]
    InvalidExponent(f64),
    #[error("regularization weight must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("observed entry ({row}, {col}) is outside a {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("observed entry ({row}, {col}) appears more than once")]
    Duplicate { row: usize, col: usize },
    #[error("observed value at ({row}, {col}) is not finite")]
    NonFiniteValue { row: usize, col: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A differentiable loss with Lipschitz-continuous gradient, bounded below.
pub trait SmoothObjective: Sync {
    fn shape(&self) -> (usize, usize);

    fn value(&self, x: &DenseMatrix) -> Result<f64, ObjectiveError>;

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix, ObjectiveError>;

    /// Lipschitz constant `L_f` of the gradient in the Frobenius norm.
    fn lipschitz_bound(&self) -> f64;

    /// A finite lower bound on `value` over all matrices.
    fn lower_bound(&self) -> f64;

    fn check_shape(&self, x: &DenseMatrix) -> Result<(), ObjectiveError> {
        if x.shape() != self.shape() {
            return Err(ObjectiveError::ShapeMismatch {
                expected: self.shape(),
                found: x.shape(),
            });
        }
        Ok(())
    }
}

/// One observed entry `M[row, col] = value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// `f(X) = ||P_Omega(X - M)||_F^2` over a set of observed entries.
///
/// No `1/2` factor, so `L_f = 2` and the infimum is `0`.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    rows: usize,
    cols: usize,
    observed: Vec<Observation>,
}

impl CompletionProblem {
    pub fn new(
        rows: usize,
        cols: usize,
        observed: Vec<Observation>,
    ) -> Result<Self, ObjectiveError> {
        let mut seen = HashSet::with_capacity(observed.len());
        for o in &observed {
            if o.row >= rows || o.col >= cols {
                return Err(ObjectiveError::OutOfBounds {
                    row: o.row,
                    col: o.col,
                    rows,
                    cols,
                });
            }
            if !o.value.is_finite() {
                return Err(ObjectiveError::NonFiniteValue {
                    row: o.row,
                    col: o.col,
                });
            }
            if !seen.insert((o.row, o.col)) {
                return Err(ObjectiveError::Duplicate {
                    row: o.row,
                    col: o.col,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            observed,
        })
    }

    /// Observes every entry of `m` listed in `pairs`.
    pub fn from_pairs(
        m: &DenseMatrix,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ObjectiveError> {
        let (rows, cols) = m.shape();
        let mut observed = Vec::new();
        for (row, col) in pairs {
            if row >= rows || col >= cols {
                return Err(ObjectiveError::OutOfBounds {
                    row,
                    col,
                    rows,
                    cols,
                });
            }
            observed.push(Observation {
                row,
                col,
                value: m[(row, col)],
            });
        }
        Self::new(rows, cols, observed)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observed
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// `P_Omega(M)`: observed values in place, zeros elsewhere.
    pub fn observed_matrix(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for o in &self.observed {
            out[(o.row, o.col)] = o.value;
        }
        out
    }
}

impl SmoothObjective for CompletionProblem {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn value(&self, x: &DenseMatrix) -> Result<f64, ObjectiveError> {
        self.check_shape(x)?;
        Ok(self
            .observed
            .iter()
            .map(|o| {
                let r = x[(o.row, o.col)] - o.value;
                r * r
            })
            .sum())
    }

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix, ObjectiveError> {
        self.check_shape(x)?;
        let mut g = DenseMatrix::zeros(self.rows, self.cols);
        for o in &self.observed {
            g[(o.row, o.col)] = 2.0 * (x[(o.row, o.col)] - o.value);
        }
        Ok(g)
    }

    fn lipschitz_bound(&self) -> f64 {
        2.0
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// Smooth vector function `h: R^l -> R` used through its diagonal lift.
pub trait VectorFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn lipschitz_bound(&self) -> f64;
    fn lower_bound(&self) -> f64;
}

/// `h(x) = ||x - a||^2`.
#[derive(Debug, Clone)]
pub struct SquaredDistance {
    pub target: DVector<f64>,
}

impl VectorFunction for SquaredDistance {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (x - &self.target).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.target) * 2.0
    }

    fn lipschitz_bound(&self) -> f64 {
        2.0
    }

    fn lower_bound(&self) -> f64 {
        0.0
    }
}

/// `f(X) = h(diag(X))` on square `l x l` matrices.
#[derive(Debug, Clone)]
pub struct DiagonalObjective<H> {
    pub inner: H,
}

impl<H: VectorFunction> DiagonalObjective<H> {
    pub fn new(inner: H) -> Self {
        Self { inner }
    }
}

impl<H: VectorFunction> SmoothObjective for DiagonalObjective<H> {
    fn shape(&self) -> (usize, usize) {
        (self.inner.dim(), self.inner.dim())
    }

    fn value(&self, x: &DenseMatrix) -> Result<f64, ObjectiveError> {
        self.check_shape(x)?;
        Ok(self.inner.value(&x.diagonal()))
    }

    fn gradient(&self, x: &DenseMatrix) -> Result<DenseMatrix, ObjectiveError> {
        self.check_shape(x)?;
        Ok(DenseMatrix::from_diagonal(&self.inner.gradient(&x.diagonal())))
    }

    fn lipschitz_bound(&self) -> f64 {
        self.inner.lipschitz_bound()
    }

    fn lower_bound(&self) -> f64 {
        self.inner.lower_bound()
    }
}

pub fn check_exponent(p: f64) -> Result<(), ObjectiveError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidExponent(p))
    }
}

pub fn check_lambda(lambda: f64) -> Result<(), ObjectiveError> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidLambda(lambda))
    }
}

/// `lambda * sum sigma_i^p` over singular values above the zero threshold.
pub fn schatten_from_sigma(sigma: &[f64], p: f64, lambda: f64) -> f64 {
    let thr = zero_threshold(sigma);
    lambda
        * sigma
            .iter()
            .filter(|&&s| s > thr)
            .map(|s| s.powf(p))
            .sum::<f64>()
}

/// `lambda * ||X||_p^p`.
pub fn schatten_term(x: &DenseMatrix, p: f64, lambda: f64) -> Result<f64, ObjectiveError> {
    check_exponent(p)?;
    check_lambda(lambda)?;
    let sigma = spectral::singular_values(x)?;
    Ok(schatten_from_sigma(&sigma, p, lambda))
}

/// `F(X) = f(X) + lambda ||X||_p^p`.
pub fn total_objective<O: SmoothObjective + ?Sized>(
    obj: &O,
    x: &DenseMatrix,
    p: f64,
    lambda: f64,
) -> Result<f64, ObjectiveError> {
    let f = obj.value(x)?;
    Ok(f + schatten_term(x, p, lambda)?)
}
