//! Smoothed surrogates of the Schatten-p penalty and the reweighting rules
//! built on them.
//!
//! The first method smooths with `(sigma_i + eps_i)^p` under a geometrically
//! shrinking `eps`. The second uses the fixed-`eps` function
//!
//! ```text
//! h_u(t) = min_{0 <= s <= u} p (|t| s - s^q / q),   1/p + 1/q = 1,
//! ```
//!
//! whose minimizer is `s* = |t|^{1/(q-1)}` when that point lies in `[0, u]`
//! (i.e. `|t| >= u^{q-1}`), giving `h_u(t) = |t|^p`; otherwise the
//! constraint is active and `h_u(t) = p (|t| u - u^q / q)`.

use thiserror::Error;

use crate::objective::{check_exponent, check_lambda, ObjectiveError, SmoothObjective};
use crate::spectral::{self, DenseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("smoothing vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("smoothing parameter {index} must be positive and finite, got {value}")]
    NonPositiveEpsilon { index: usize, value: f64 },
    #[error("cap u must be positive and finite, got {0}")]
    NonPositiveCap(f64),
    #[error("invalid search input: {0}")]
    InvalidSearch(&'static str),
    #[error(
        "no admissible smoothing parameter: the admissible set is empty to working precision \
         (reduce lambda or improve the starting point)"
    )]
    EmptyEpsilonSet,
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

fn check_eps(eps: &[f64], l: usize) -> Result<(), SurrogateError> {
    if eps.len() != l {
        return Err(SurrogateError::LengthMismatch {
            expected: l,
            found: eps.len(),
        });
    }
    if let Some((index, &value)) = eps
        .iter()
        .enumerate()
        .find(|(_, e)| !(**e > 0.0 && e.is_finite()))
    {
        return Err(SurrogateError::NonPositiveEpsilon { index, value });
    }
    Ok(())
}

/// Smoothing schedule `eps^k = decay^k * base` of the first method.
///
/// Clamped at `f64::MIN_POSITIVE` so the vector stays strictly positive after
/// `decay^k` underflows.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub base: f64,
    pub decay: f64,
    pub len: usize,
}

impl EpsilonSchedule {
    pub fn new(base: f64, decay: f64, len: usize) -> Self {
        assert!(base > 0.0 && base.is_finite(), "schedule base must be positive");
        assert!(decay > 0.0 && decay < 1.0, "schedule decay must be in (0, 1)");
        Self { base, decay, len }
    }

    /// The schedule used in the experiments: `0.5^k * e`.
    pub fn halving(len: usize) -> Self {
        Self::new(1.0, 0.5, len)
    }

    pub fn at(&self, k: usize) -> Vec<f64> {
        let exp = i32::try_from(k).unwrap_or(i32::MAX);
        let v = (self.base * self.decay.powi(exp)).max(f64::MIN_POSITIVE);
        vec![v; self.len]
    }
}

/// `lambda * sum_i (sigma_i + eps_i)^p` for descending `sigma`.
pub fn fbar_penalty(sigma: &[f64], eps: &[f64], p: f64, lambda: f64) -> Result<f64, SurrogateError> {
    check_eps(eps, sigma.len())?;
    Ok(lambda
        * sigma
            .iter()
            .zip(eps)
            .map(|(s, e)| (s + e).powf(p))
            .sum::<f64>())
}

/// `Fbar_eps(X) = f(X) + lambda * sum_i (sigma_i(X) + eps_i)^p`.
pub fn fbar_eps<O: SmoothObjective + ?Sized>(
    obj: &O,
    x: &DenseMatrix,
    eps: &[f64],
    p: f64,
    lambda: f64,
) -> Result<f64, SurrogateError> {
    check_exponent(p)?;
    check_lambda(lambda)?;
    let f = obj.value(x)?;
    let sigma = spectral::singular_values(x).map_err(ObjectiveError::from)?;
    Ok(f + fbar_penalty(&sigma, eps, p, lambda)?)
}

/// Conjugate exponent `q = p / (p - 1) < 0`.
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Closed form of `h_u(t)`.
pub fn h_u(t: f64, u: f64, p: f64, q: f64) -> Result<f64, SurrogateError> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(SurrogateError::NonPositiveCap(u));
    }
    Ok(h_u_unchecked(t, u, p, q))
}

fn h_u_unchecked(t: f64, u: f64, p: f64, q: f64) -> f64 {
    let a = t.abs();
    if a >= u.powf(q - 1.0) {
        a.powf(p)
    } else {
        p * (a * u - u.powf(q) / q)
    }
}

/// Fixed smoothing parameters of the second method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub eps: f64,
    pub p: f64,
    pub q: f64,
    /// Cap `u = (eps / (lambda l))^{1/q}`.
    pub u: f64,
    pub lambda: f64,
    pub l: usize,
}

impl SmoothingParams {
    pub fn new(eps: f64, p: f64, lambda: f64, l: usize) -> Result<Self, SurrogateError> {
        check_exponent(p)?;
        check_lambda(lambda)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SurrogateError::NonPositiveEpsilon { index: 0, value: eps });
        }
        if l == 0 {
            return Err(SurrogateError::InvalidSearch("matrix dimension must be positive"));
        }
        let q = conjugate_exponent(p);
        let u = (eps / (lambda * l as f64)).powf(1.0 / q);
        if !(u > 0.0 && u.is_finite()) {
            return Err(SurrogateError::NonPositiveCap(u));
        }
        Ok(Self {
            eps,
            p,
            q,
            u,
            lambda,
            l,
        })
    }

    /// `u^{q-1}`: singular values at or above this are left unsmoothed.
    pub fn kink(&self) -> f64 {
        self.u.powf(self.q - 1.0)
    }

    pub fn h(&self, t: f64) -> f64 {
        h_u_unchecked(t, self.u, self.p, self.q)
    }
}

/// `lambda * sum_i h_u(sigma_i)`.
pub fn f_eps_penalty(sigma: &[f64], params: &SmoothingParams) -> f64 {
    params.lambda * sigma.iter().map(|&s| params.h(s)).sum::<f64>()
}

/// `F_eps(X) = f(X) + lambda * sum_i h_u(sigma_i(X))`.
pub fn f_eps<O: SmoothObjective + ?Sized>(
    obj: &O,
    x: &DenseMatrix,
    params: &SmoothingParams,
) -> Result<f64, SurrogateError> {
    let f = obj.value(x)?;
    let sigma = spectral::singular_values(x).map_err(ObjectiveError::from)?;
    if sigma.len() != params.l {
        return Err(SurrogateError::LengthMismatch {
            expected: params.l,
            found: sigma.len(),
        });
    }
    Ok(f + f_eps_penalty(&sigma, params))
}

/// Inputs of the admissible-`eps` search.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonBound {
    /// `F(X^0)` at the current `lambda`.
    pub start_value: f64,
    pub lambda: f64,
    pub p: f64,
    pub lipschitz: f64,
    pub f_lower: f64,
    pub l: usize,
}

impl EpsilonBound {
    /// `g(eps) = l lambda [sqrt(2 L_f (F0 + eps - f_lower)) / (lambda p)]^q - eps`.
    ///
    /// Strictly decreasing; the admissible set is `{eps > 0 : g(eps) > 0}`.
    pub fn gap(&self, eps: f64) -> f64 {
        let q = conjugate_exponent(self.p);
        let slack = (self.start_value + eps - self.f_lower).max(0.0);
        let base = (2.0 * self.lipschitz * slack).sqrt() / (self.lambda * self.p);
        self.l as f64 * self.lambda * base.powf(q) - eps
    }

    pub fn admits(&self, eps: f64) -> bool {
        eps > 0.0 && self.gap(eps) > 0.0
    }
}

const MAX_BISECTIONS: usize = 200;

/// Largest admissible `eps` to within `tol`, returned from inside the set.
///
/// The returned value `eps*` satisfies `g(eps*) > 0` and
/// `sup - eps* <= tol * min(1, eps*)`: an absolute tolerance for suprema above
/// one and a relative one below, so the search stays meaningful when the
/// supremum itself is smaller than `tol`.
pub fn epsilon_supremum(bound: &EpsilonBound, tol: f64) -> Result<f64, SurrogateError> {
    check_exponent(bound.p)?;
    check_lambda(bound.lambda)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SurrogateError::InvalidSearch("tolerance must be positive"));
    }
    if !(bound.start_value.is_finite() && bound.f_lower.is_finite() && bound.lipschitz > 0.0) {
        return Err(SurrogateError::InvalidSearch("non-finite objective data"));
    }
    if bound.start_value < bound.f_lower {
        return Err(SurrogateError::InvalidSearch("F(X0) below the lower bound of f"));
    }
    if bound.l == 0 {
        return Err(SurrogateError::InvalidSearch("matrix dimension must be positive"));
    }

    let mut lo = tol;
    while !bound.admits(lo) {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(SurrogateError::EmptyEpsilonSet);
        }
    }
    let mut hi = lo.max(1.0);
    let mut doublings = 0;
    while bound.gap(hi) >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(SurrogateError::InvalidSearch("admissible set appears unbounded"));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * lo.min(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bound.admits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `s_i = (sigma_i + eps_i)^{p-1}`.
pub fn weights_alg1(sigma: &[f64], eps: &[f64], p: f64) -> Result<Vec<f64>, SurrogateError> {
    check_exponent(p)?;
    check_eps(eps, sigma.len())?;
    Ok(sigma
        .iter()
        .zip(eps)
        .map(|(s, e)| (s + e).powf(p - 1.0))
        .collect())
}

/// `s_i = min(u, sigma_i^{p-1})` with `0^{p-1} = +inf`.
pub fn weights_alg2(sigma: &[f64], params: &SmoothingParams) -> Vec<f64> {
    sigma
        .iter()
        .map(|&s| {
            let raw = if s > 0.0 {
                s.powf(params.p - 1.0)
            } else {
                f64::INFINITY
            };
            raw.min(params.u)
        })
        .collect()
}
