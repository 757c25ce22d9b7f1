//! Schatten-p quasi-norm regularized matrix minimization by iterative
//! reweighted singular value minimization.
//!
//! The crate solves
//!
//! ```text
//! min_X  f(X) + lambda * sum_i sigma_i(X)^p,   0 < p < 1,
//! ```
//!
//! for a smooth `f` with Lipschitz gradient, with matrix completion
//! (`f(X) = ||P_Omega(X - M)||_F^2`) as the concrete instance.
//!
//! - [`spectral`]: thin SVD and the closed-form weighted singular value prox.
//! - [`objective`]: the smooth-loss contract, matrix completion, the
//!   Schatten-p penalty.
//! - [`surrogate`]: smoothed objectives and reweighting rules.
//! - [`solver`]: the two reweighted methods, the nuclear-norm baseline and
//!   continuation in `lambda`.
//! - [`harness`]: random instances, recovery sweeps and file formats.

pub mod harness;
pub mod objective;
pub mod solver;
pub mod spectral;
pub mod surrogate;

pub use objective::{CompletionProblem, Observation, SmoothObjective};
pub use solver::{
    continuation_solve, nuclear_pg_solve, solve, ContinuationSchedule, SolveOutput, SolveTrace,
    SolverConfig, SolverError, Variant,
};
pub use spectral::{thin_svd, weighted_sv_prox, DenseMatrix, SvdFactors};
