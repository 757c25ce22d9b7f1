use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::objective::CompletionProblem;
use crate::spectral::DenseMatrix;

use super::HarnessError;

/// A random low-rank completion instance: `M = M_L M_R^T` with standard
/// Gaussian factors and `round(sr * m * n)` entries observed uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub sr: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.m == 0 || self.n == 0 {
            return Err(HarnessError::InvalidSpec("matrix dimensions must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.m.min(self.n) {
            return Err(HarnessError::InvalidSpec(format!(
                "rank {} must lie in 1..={}",
                self.rank,
                self.m.min(self.n)
            )));
        }
        if !(self.sr > 0.0 && self.sr <= 1.0) {
            return Err(HarnessError::InvalidSpec(format!(
                "sampling ratio {} must lie in (0, 1]",
                self.sr
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        let total = self.m * self.n;
        ((self.sr * total as f64).round() as usize).min(total)
    }
}

/// Builds the observed problem and the ground truth, deterministically in `seed`.
pub fn gen_instance(spec: &InstanceSpec) -> Result<(CompletionProblem, DenseMatrix), HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let left = DenseMatrix::from_fn(spec.m, spec.rank, |_, _| rng.sample(StandardNormal));
    let right = DenseMatrix::from_fn(spec.n, spec.rank, |_, _| rng.sample(StandardNormal));
    let truth = &left * right.transpose();

    let mut pairs: Vec<(usize, usize)> = (0..spec.m)
        .flat_map(|i| (0..spec.n).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(&mut rng);
    pairs.truncate(spec.sample_count());
    pairs.sort_unstable();

    let problem = CompletionProblem::from_pairs(&truth, pairs)?;
    Ok((problem, truth))
}

/// `||X - M||_F / ||M||_F`.
pub fn rel_err(x: &DenseMatrix, truth: &DenseMatrix) -> Result<f64, HarnessError> {
    if x.shape() != truth.shape() {
        return Err(HarnessError::ShapeMismatch {
            expected: truth.shape(),
            found: x.shape(),
        });
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(HarnessError::ZeroGroundTruth);
    }
    Ok((x - truth).norm() / denom)
}

/// Recovery threshold on `rel_err`.
pub const SUCCESS_THRESHOLD: f64 = 1e-3;

pub fn is_success(rel_err: f64) -> bool {
    rel_err < SUCCESS_THRESHOLD
}

/// Mixes a base seed with a rank and trial index into an instance seed.
pub fn derive_seed(base: u64, rank: usize, trial: usize) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base) ^ rank as u64) ^ trial as u64)
}
