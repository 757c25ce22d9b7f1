//! Iterative reweighted singular value minimization.
//!
//! Both reweighted methods share one outer loop:
//!
//! 1. derive weights `s^k` from the singular values of `X^k`;
//! 2. starting from a Barzilai-Borwein guess `L_k`, solve the weighted prox
//!    subproblem and multiply `L_k` by `tau` until the nonmonotone test on the
//!    smoothed objective passes;
//! 3. stop once the scaled stationarity residual drops below `eps_bar`.
//!
//! They differ in the smoothing: [`Variant::Irsvm1`] uses
//! `(sigma + eps^k)^p` with `eps^k = 0.5^k`, [`Variant::Irsvm2`] a fixed
//! `eps` chosen near the supremum of its admissible set. [`Variant::Nuclear`]
//! runs the same loop with constant weights as a convex baseline.

mod continuation;
mod step;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objective::{
    check_exponent, check_lambda, schatten_from_sigma, ObjectiveError, SmoothObjective,
};
use crate::spectral::{self, numerical_rank, DenseMatrix, SpectralError};
use crate::surrogate::{
    epsilon_supremum, f_eps_penalty, fbar_penalty, weights_alg1, weights_alg2, EpsilonBound,
    EpsilonSchedule, SmoothingParams, SurrogateError,
};

pub use continuation::{continuation_solve, ContinuationOutput, ContinuationSchedule};
pub use step::{accept_test, bb_init, inner_iteration_bound, inner_step, termination_residual};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("vector has length {found}, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("starting point contains non-finite entries")]
    NonFiniteStart,
    #[error("non-finite objective value at outer iteration {0}")]
    NonFiniteObjective(usize),
    #[error("no step accepted after {trials} trials at outer iteration {k}")]
    BacktrackLimit { k: usize, trials: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Irsvm1,
    Irsvm2,
    Nuclear,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Irsvm1 => "irsvm1",
            Variant::Irsvm2 => "irsvm2",
            Variant::Nuclear => "nuclear",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "irsvm1" | "irsvm-1" => Ok(Variant::Irsvm1),
            "irsvm2" | "irsvm-2" => Ok(Variant::Irsvm2),
            "nuclear" | "nuc" => Ok(Variant::Nuclear),
            other => Err(format!("unknown method `{other}` (expected irsvm1, irsvm2 or nuclear)")),
        }
    }
}

/// Algorithmic constants. Defaults are the experimental settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub l_min: f64,
    pub l_max: f64,
    /// Trial `L` for the very first outer iteration.
    pub l_init: f64,
    pub tau: f64,
    pub c: f64,
    /// Nonmonotone memory `N`: the acceptance test uses the last `N + 1` values.
    pub history: usize,
    pub p: f64,
    pub lambda: f64,
    pub eps_bar: f64,
    pub max_outer: usize,
    pub variant: Variant,
    /// `eps^k = eps_base * eps_decay^k` for the first method.
    pub eps_base: f64,
    pub eps_decay: f64,
    /// Accuracy of the admissible-`eps` search for the second method.
    pub eps_search_tol: f64,
    /// Safety cap on trials per outer iteration; far above the theoretical bound.
    pub max_trials: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            l_min: 1e-2,
            l_max: 1.0,
            l_init: 1.0,
            tau: 2.0,
            c: 1e-4,
            history: 10,
            p: 0.5,
            lambda: 1e-6,
            eps_bar: 1e-3,
            max_outer: 5000,
            variant: Variant::Irsvm1,
            eps_base: 1.0,
            eps_decay: 0.5,
            eps_search_tol: 1e-6,
            max_trials: 64,
        }
    }
}

impl SolverConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.l_min > 0.0 && self.l_min < self.l_max && self.l_max.is_finite()) {
            return bad("need 0 < l_min < l_max < inf");
        }
        if !(self.l_init >= self.l_min && self.l_init <= self.l_max) {
            return bad("l_init must lie in [l_min, l_max]");
        }
        if !(self.tau > 1.0 && self.tau.is_finite()) {
            return bad("tau must exceed 1");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("c must be positive");
        }
        if self.eps_bar.is_nan() || self.eps_bar <= 0.0 {
            return bad("eps_bar must be positive");
        }
        if self.max_outer == 0 || self.max_trials == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.eps_base > 0.0 && self.eps_base.is_finite()) {
            return bad("eps_base must be positive");
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return bad("eps_decay must lie in (0, 1)");
        }
        if self.eps_search_tol.is_nan() || self.eps_search_tol <= 0.0 {
            return bad("eps_search_tol must be positive");
        }
        check_exponent(self.p)?;
        check_lambda(self.lambda)?;
        Ok(())
    }
}

/// Diagnostics for outer iteration `k`, which starts at `X^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `F(X^k)`; the nuclear-norm objective for the baseline.
    pub objective: f64,
    /// Smoothed objective of the accepted `X^{k+1}`.
    pub surrogate: f64,
    /// Largest value in the nonmonotone window the step was tested against.
    pub window_max: f64,
    /// `||X^{k+1} - X^k||_F^2`.
    pub step_sq: f64,
    /// Accepted `L_k`.
    pub lbar: f64,
    /// Prox evaluations used, including the accepted one.
    pub inner_iterations: usize,
    /// Stationarity residual of `X^k` (relative change for the baseline).
    pub residual: f64,
    pub rank: usize,
    /// Whether the accepted shrunk vector came out in descending order.
    pub shrink_sorted: bool,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub variant: Variant,
    pub lambda: f64,
    pub p: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Smoothed objective at `X^0`.
    pub initial_surrogate: f64,
    /// Bound `M` on `F` along the run: `Fbar_{eps^0}(X^0)` for the first
    /// method, `F(X^0) + eps` for the second.
    pub objective_bound: f64,
    /// The fixed `eps` of the second method.
    pub smoothing_eps: Option<f64>,
    pub lipschitz: f64,
    pub f_lower: f64,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.records.last().map(|r| r.residual)
    }

    pub fn max_inner_iterations(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.inner_iterations)
            .max()
            .unwrap_or(0)
    }

    /// Lower bound `(lambda p / sqrt(2 L_f (M - f_lower)))^{1/(1-p)}` on the
    /// nonzero singular values of a stationary point with `F <= M`.
    pub fn singular_value_floor(&self) -> f64 {
        singular_value_floor(
            self.lambda,
            self.p,
            self.lipschitz,
            self.objective_bound,
            self.f_lower,
        )
    }
}

pub fn singular_value_floor(lambda: f64, p: f64, lipschitz: f64, bound: f64, f_lower: f64) -> f64 {
    let denom = (2.0 * lipschitz * (bound - f_lower)).sqrt();
    (lambda * p / denom).powf(1.0 / (1.0 - p))
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: DenseMatrix,
    /// Singular values of `x`, descending.
    pub sigma: Vec<f64>,
    pub trace: SolveTrace,
}

enum Smoothing {
    Schedule(EpsilonSchedule),
    Fixed(SmoothingParams),
    Convex,
}

impl Smoothing {
    /// Unscaled weights at outer iteration `k`.
    fn weights(&self, sigma: &[f64], k: usize, p: f64) -> Result<Vec<f64>, SurrogateError> {
        match self {
            Smoothing::Schedule(s) => weights_alg1(sigma, &s.at(k), p),
            Smoothing::Fixed(params) => Ok(weights_alg2(sigma, params)),
            Smoothing::Convex => Ok(vec![1.0; sigma.len()]),
        }
    }

    /// Surrogate value of an iterate with loss `f` and singular values `sigma`,
    /// accepted at iteration index `k`.
    fn value(&self, f: f64, sigma: &[f64], k: usize, p: f64, lambda: f64) -> Result<f64, SurrogateError> {
        Ok(match self {
            Smoothing::Schedule(s) => f + fbar_penalty(sigma, &s.at(k), p, lambda)?,
            Smoothing::Fixed(params) => f + f_eps_penalty(sigma, params),
            Smoothing::Convex => f + lambda * sigma.iter().sum::<f64>(),
        })
    }
}

/// Runs one reweighted (or baseline) solve at fixed `lambda` from `x0`.
///
/// Returns the last iterate with `converged = false` when `max_outer` is hit.
pub fn solve<O: SmoothObjective + ?Sized>(
    obj: &O,
    x0: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolveOutput, SolverError> {
    config.validate()?;
    if x0.shape() != obj.shape() {
        return Err(SolverError::ShapeMismatch {
            expected: obj.shape(),
            found: x0.shape(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteStart);
    }
    let started = Instant::now();
    let (p, lambda) = (config.p, config.lambda);
    let l = x0.nrows().min(x0.ncols());
    let lipschitz = obj.lipschitz_bound();
    let f_lower = obj.lower_bound();

    let mut x = x0.clone();
    let mut grad = obj.gradient(&x)?;
    let mut sigma = spectral::singular_values(&x)?;
    let mut f = obj.value(&x)?;

    let (smoothing, weight_scale) = match config.variant {
        Variant::Irsvm1 => (
            Smoothing::Schedule(EpsilonSchedule::new(config.eps_base, config.eps_decay, l)),
            lambda * p,
        ),
        Variant::Irsvm2 => {
            let bound = EpsilonBound {
                start_value: f + schatten_from_sigma(&sigma, p, lambda),
                lambda,
                p,
                lipschitz,
                f_lower,
                l,
            };
            let eps = epsilon_supremum(&bound, config.eps_search_tol)?;
            (
                Smoothing::Fixed(SmoothingParams::new(eps, p, lambda, l)?),
                lambda * p,
            )
        }
        Variant::Nuclear => (Smoothing::Convex, lambda),
    };

    let initial_surrogate = smoothing.value(f, &sigma, 0, p, lambda)?;
    if !initial_surrogate.is_finite() {
        return Err(SolverError::NonFiniteObjective(0));
    }
    let (objective_bound, smoothing_eps) = match &smoothing {
        Smoothing::Fixed(params) => (
            f + schatten_from_sigma(&sigma, p, lambda) + params.eps,
            Some(params.eps),
        ),
        _ => (initial_surrogate, None),
    };

    let mut trace = SolveTrace {
        variant: config.variant,
        lambda,
        p,
        records: Vec::new(),
        converged: false,
        initial_surrogate,
        objective_bound,
        smoothing_eps,
        lipschitz,
        f_lower,
    };

    let window = config.history + 1;
    let mut history: VecDeque<f64> = VecDeque::with_capacity(window);
    history.push_back(initial_surrogate);
    let mut previous: Option<(DenseMatrix, DenseMatrix)> = None;

    for k in 0..config.max_outer {
        let weights = smoothing.weights(&sigma, k, p)?;
        let mut trial_l = match &previous {
            None => config.l_init,
            Some((x_prev, g_prev)) => bb_init(&(&x - x_prev), &(&grad - g_prev), config.l_min, config.l_max),
        };
        let window_max = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut trials = 0;
        let (out, f_next, sigma_next, surrogate, step_sq) = loop {
            trials += 1;
            let out = inner_step(&x, &grad, trial_l, &weights, weight_scale)?;
            let sigma_next = out.sorted_values();
            let f_next = obj.value(&out.x)?;
            let surrogate = smoothing.value(f_next, &sigma_next, k + 1, p, lambda)?;
            if !surrogate.is_finite() {
                return Err(SolverError::NonFiniteObjective(k));
            }
            let step_sq = (&out.x - &x).norm_squared();
            if accept_test(surrogate, history.iter(), config.c, step_sq) {
                break (out, f_next, sigma_next, surrogate, step_sq);
            }
            if trials >= config.max_trials {
                return Err(SolverError::BacktrackLimit { k, trials });
            }
            trial_l *= config.tau;
        };

        let (objective, residual) = match config.variant {
            Variant::Nuclear => (
                f + lambda * sigma.iter().sum::<f64>(),
                step_sq.sqrt() / x.norm().max(1.0),
            ),
            _ => (
                f + schatten_from_sigma(&sigma, p, lambda),
                termination_residual(&grad, &out.z, &sigma, lambda, p)?,
            ),
        };
        trace.records.push(IterationRecord {
            k,
            objective,
            surrogate,
            window_max,
            step_sq,
            lbar: trial_l,
            inner_iterations: trials,
            residual,
            rank: numerical_rank(&sigma),
            shrink_sorted: out.is_sorted(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        });

        if residual <= config.eps_bar {
            trace.converged = true;
            // The residual certifies X^k for the reweighted methods and the
            // step X^k -> X^{k+1} for the baseline.
            if config.variant == Variant::Nuclear {
                return Ok(SolveOutput {
                    x: out.x,
                    sigma: sigma_next,
                    trace,
                });
            }
            return Ok(SolveOutput { x, sigma, trace });
        }

        if history.len() == window {
            history.pop_front();
        }
        history.push_back(surrogate);
        let g_next = obj.gradient(&out.x)?;
        previous = Some((std::mem::replace(&mut x, out.x), std::mem::replace(&mut grad, g_next)));
        sigma = sigma_next;
        f = f_next;
    }

    Ok(SolveOutput { x, sigma, trace })
}

/// Proximal gradient on `f + lambda ||X||_*` with the same step rules.
pub fn nuclear_pg_solve<O: SmoothObjective + ?Sized>(
    obj: &O,
    x0: &DenseMatrix,
    config: &SolverConfig,
) -> Result<SolveOutput, SolverError> {
    let config = config.clone().with_variant(Variant::Nuclear);
    solve(obj, x0, &config)
}
