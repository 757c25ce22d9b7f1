//! Continuation in `lambda`: solve a decreasing sequence of problems, each
//! warm-started from the previous solution.

use serde::{Deserialize, Serialize};

use crate::objective::SmoothObjective;
use crate::spectral::DenseMatrix;

use super::{solve, SolveTrace, SolverConfig, SolverError};

/// `lambda_0`, then `lambda_l = max(decay * lambda_{l-1}, floor)` down to `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub lambda0: f64,
    pub target: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for ContinuationSchedule {
    fn default() -> Self {
        Self {
            lambda0: 10.0,
            target: 1e-6,
            decay: 0.1,
            floor: 1e-6,
        }
    }
}

// Stage values within this relative distance of the target snap onto it, so
// that 10 * 0.1^7 lands on 1e-6 rather than one rounding error above it.
const SNAP_RTOL: f64 = 1e-9;

impl ContinuationSchedule {
    /// A single stage at `lambda`.
    pub fn fixed(lambda: f64) -> Self {
        Self {
            lambda0: lambda,
            target: lambda,
            decay: 0.1,
            floor: lambda,
        }
    }

    pub fn stages(&self) -> Result<Vec<f64>, SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.floor > 0.0 && self.target >= self.floor && self.lambda0 >= self.target) {
            return bad("continuation needs lambda0 >= target >= floor > 0");
        }
        if !self.lambda0.is_finite() {
            return bad("lambda0 must be finite");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("continuation decay must lie in (0, 1)");
        }
        let close = |v: f64| v <= self.target * (1.0 + SNAP_RTOL);
        let mut out = Vec::new();
        let mut lambda = if close(self.lambda0) { self.target } else { self.lambda0 };
        loop {
            out.push(lambda);
            if lambda <= self.target {
                return Ok(out);
            }
            let next = (lambda * self.decay).max(self.floor);
            lambda = if close(next) { self.target } else { next };
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOutput {
    pub x: DenseMatrix,
    pub sigma: Vec<f64>,
    pub stages: Vec<SolveTrace>,
}

impl ContinuationOutput {
    /// Whether the final (target) stage met its stopping rule.
    pub fn converged(&self) -> bool {
        self.stages.last().is_some_and(|s| s.converged)
    }

    pub fn total_iterations(&self) -> usize {
        self.stages.iter().map(SolveTrace::iterations).sum()
    }
}

/// Runs [`solve`] once per stage of `schedule`, overriding `config.lambda`.
pub fn continuation_solve<O: SmoothObjective + ?Sized>(
    obj: &O,
    x0: &DenseMatrix,
    config: &SolverConfig,
    schedule: &ContinuationSchedule,
) -> Result<ContinuationOutput, SolverError> {
    let lambdas = schedule.stages()?;
    let mut x = x0.clone();
    let mut sigma = Vec::new();
    let mut stages = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        let out = solve(obj, &x, &cfg)?;
        x = out.x;
        sigma = out.sigma;
        stages.push(out.trace);
    }
    Ok(ContinuationOutput { x, sigma, stages })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule_has_eight_stages() {
        let stages = ContinuationSchedule::default().stages().unwrap();
        assert_eq!(stages.len(), 8);
        assert_eq!(stages[0], 10.0);
        assert_eq!(stages[1], 1.0);
        assert_eq!(*stages.last().unwrap(), 1e-6);
        assert!(stages.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn fixed_schedule_is_single_stage() {
        assert_eq!(ContinuationSchedule::fixed(0.3).stages().unwrap(), vec![0.3]);
    }

    #[test]
    fn floor_stops_the_descent() {
        let s = ContinuationSchedule {
            lambda0: 1.0,
            target: 0.05,
            decay: 0.5,
            floor: 0.05,
        };
        assert_eq!(s.stages().unwrap(), vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.05]);
    }

    #[test]
    fn invalid_schedules() {
        let base = ContinuationSchedule::default();
        assert!(ContinuationSchedule { lambda0: 1e-7, ..base }.stages().is_err());
        assert!(ContinuationSchedule { decay: 1.0, ..base }.stages().is_err());
        assert!(ContinuationSchedule { floor: 1e-5, ..base }.stages().is_err());
    }
}
