//! Building blocks of one outer iteration.

use crate::spectral::{weighted_sv_prox, DenseMatrix, ProxOutput, SpectralError, SvdFactors};

use super::SolverError;

/// Barzilai-Borwein curvature `<dX, dG> / ||dX||^2`, clamped to `[l_min, l_max]`.
///
/// Falls back to `l_max` when `dX = 0` or the ratio is undefined.
pub fn bb_init(dx: &DenseMatrix, dg: &DenseMatrix, l_min: f64, l_max: f64) -> f64 {
    let denom = dx.norm_squared();
    if denom == 0.0 {
        return l_max;
    }
    let ratio = dx.dot(dg) / denom;
    if ratio.is_nan() {
        return l_max;
    }
    ratio.min(l_max).max(l_min)
}

/// One proximal-gradient trial: the weighted prox of `X^k - grad/L` with
/// weights `scale * weights`.
pub fn inner_step(
    x: &DenseMatrix,
    grad: &DenseMatrix,
    step: f64,
    weights: &[f64],
    scale: f64,
) -> Result<ProxOutput, SpectralError> {
    let scaled: Vec<f64> = weights.iter().map(|w| scale * w).collect();
    weighted_sv_prox(x, grad, step, &scaled)
}

/// Nonmonotone acceptance: `candidate <= max(history) - (c/2) ||dX||^2`.
pub fn accept_test<'a>(
    candidate: f64,
    history: impl IntoIterator<Item = &'a f64>,
    c: f64,
    step_sq: f64,
) -> bool {
    let reference = history
        .into_iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    candidate <= reference - 0.5 * c * step_sq
}

/// Scaled stationarity residual
///
/// ```text
/// || Diag(sigma^{1/2}) U^T G V Diag(sigma^{1/2}) + lambda p Diag(sigma^p) ||_max
/// ```
///
/// with `U, V` the singular vectors of the accepted prox center and `sigma`
/// the singular values of the current iterate. Zero singular values drop out.
pub fn termination_residual(
    grad: &DenseMatrix,
    z: &SvdFactors,
    sigma: &[f64],
    lambda: f64,
    p: f64,
) -> Result<f64, SolverError> {
    if sigma.len() != z.len() {
        return Err(SolverError::LengthMismatch {
            expected: z.len(),
            found: sigma.len(),
        });
    }
    if grad.nrows() != z.u.nrows() || grad.ncols() != z.v.nrows() {
        return Err(SolverError::ShapeMismatch {
            expected: (z.u.nrows(), z.v.nrows()),
            found: grad.shape(),
        });
    }
    let support: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > 0.0).collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    let u = z.u.select_columns(&support);
    let v = z.v.select_columns(&support);
    let core = u.tr_mul(&(grad * v));
    let mut worst = 0.0_f64;
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            let mut entry = (sigma[i] * sigma[j]).sqrt() * core[(a, b)];
            if i == j {
                entry += lambda * p * sigma[i].powf(p);
            }
            worst = worst.max(entry.abs());
        }
    }
    Ok(worst)
}

/// Worst-case number of trials per outer iteration,
/// `max(floor((ln(L_f + c) - ln L_min) / ln tau + 1), 1)`.
pub fn inner_iteration_bound(lipschitz: f64, c: f64, l_min: f64, tau: f64) -> usize {
    let raw = ((lipschitz + c).ln() - l_min.ln()) / tau.ln() + 1.0;
    (raw.floor().max(1.0)) as usize
}
