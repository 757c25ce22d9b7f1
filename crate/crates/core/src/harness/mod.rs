//! Experiment harness: synthetic instances, recovery sweeps and file I/O.

mod instance;
pub mod io;

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::objective::{CompletionProblem, ObjectiveError};
use crate::solver::{
    continuation_solve, ContinuationOutput, ContinuationSchedule, SolverConfig, SolverError,
    Variant,
};
use crate::spectral::{numerical_rank, DenseMatrix};

pub use instance::{
    derive_seed, gen_instance, is_success, rel_err, InstanceSpec, SUCCESS_THRESHOLD,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid instance: {0}")]
    InvalidSpec(String),
    #[error("ground truth is the zero matrix")]
    ZeroGroundTruth,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: entry ({row}, {col}) outside a {rows} x {cols} matrix")]
    OutOfBounds {
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("line {line}: entry ({row}, {col}) observed twice")]
    Duplicate { line: usize, row: usize, col: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Outcome of one method on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub method: Variant,
    pub rel_err: f64,
    pub success: bool,
    pub seconds: f64,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `problem` with continuation from the observed entries (zeros
/// elsewhere) and scores the result against `truth`.
pub fn run_method(
    problem: &CompletionProblem,
    truth: &DenseMatrix,
    config: &SolverConfig,
    schedule: &ContinuationSchedule,
) -> Result<(RunReport, ContinuationOutput), HarnessError> {
    let x0 = problem.observed_matrix();
    let start = Instant::now();
    let out = continuation_solve(problem, &x0, config, schedule)?;
    let seconds = start.elapsed().as_secs_f64();
    let err = rel_err(&out.x, truth)?;
    let report = RunReport {
        method: config.variant,
        rel_err: err,
        success: is_success(err),
        seconds,
        rank: numerical_rank(&out.sigma),
        iterations: out.total_iterations(),
        converged: out.converged(),
    };
    Ok((report, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub m: usize,
    pub n: usize,
    pub sr: f64,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Variant>,
    pub base_seed: u64,
}

/// One trial of one method. A run that errored has `rel_err = inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub method: Variant,
    pub rank: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_err: f64,
    pub success: bool,
    pub seconds: f64,
    pub converged: bool,
    pub error: Option<String>,
}

/// Aggregate over the trials of one (method, rank) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: Variant,
    pub m: usize,
    pub n: usize,
    pub sr: f64,
    pub rank: usize,
    pub trials: usize,
    pub successes: usize,
    pub mean_rel_err: f64,
    pub mean_seconds: f64,
}

impl SweepRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials.max(1) as f64
    }
}

/// Runs every method on the same `trials` instances per rank.
///
/// Instance seeds depend only on `(base_seed, rank, trial)`, so all methods
/// see identical data. Runs execute in parallel; results keep job order.
pub fn recovery_sweep(
    spec: &SweepSpec,
    config: &SolverConfig,
    schedule: &ContinuationSchedule,
) -> Result<(Vec<SweepRow>, Vec<TrialRecord>), HarnessError> {
    config.validate()?;
    schedule.stages()?;
    for &rank in &spec.ranks {
        InstanceSpec {
            m: spec.m,
            n: spec.n,
            rank,
            sr: spec.sr,
            seed: 0,
        }
        .validate()?;
    }
    let jobs: Vec<(Variant, usize, usize)> = spec
        .methods
        .iter()
        .flat_map(|&v| {
            spec.ranks
                .iter()
                .flat_map(move |&r| (0..spec.trials).map(move |t| (v, r, t)))
        })
        .collect();

    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(method, rank, trial)| {
            let seed = derive_seed(spec.base_seed, rank, trial);
            let instance = InstanceSpec {
                m: spec.m,
                n: spec.n,
                rank,
                sr: spec.sr,
                seed,
            };
            let cfg = config.clone().with_variant(method);
            let outcome = gen_instance(&instance)
                .and_then(|(problem, truth)| run_method(&problem, &truth, &cfg, schedule));
            match outcome {
                Ok((r, _)) => TrialRecord {
                    method,
                    rank,
                    trial,
                    seed,
                    rel_err: r.rel_err,
                    success: r.success,
                    seconds: r.seconds,
                    converged: r.converged,
                    error: None,
                },
                Err(e) => TrialRecord {
                    method,
                    rank,
                    trial,
                    seed,
                    rel_err: f64::INFINITY,
                    success: false,
                    seconds: 0.0,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let rows = records
        .chunks(spec.trials.max(1))
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| {
            let count = chunk.len() as f64;
            SweepRow {
                method: chunk[0].method,
                m: spec.m,
                n: spec.n,
                sr: spec.sr,
                rank: chunk[0].rank,
                trials: chunk.len(),
                successes: chunk.iter().filter(|t| t.success).count(),
                mean_rel_err: chunk.iter().map(|t| t.rel_err).sum::<f64>() / count,
                mean_seconds: chunk.iter().map(|t| t.seconds).sum::<f64>() / count,
            }
        })
        .collect();
    Ok((rows, records))
}

pub const SWEEP_HEADER: [&str; 9] = [
    "method",
    "m",
    "n",
    "sr",
    "rank",
    "trials",
    "successes",
    "mean_rel_err",
    "mean_seconds",
];

fn fmt_float(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:e}")
    }
}

pub fn write_sweep_csv(rows: &[SweepRow], writer: impl std::io::Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.m.to_string(),
            r.n.to_string(),
            r.sr.to_string(),
            r.rank.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            fmt_float(r.mean_rel_err),
            fmt_float(r.mean_seconds),
        ])?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: "<sweep>".into(),
        source,
    })
}

/// Parses `start:step:stop` (inclusive) or a comma-separated list.
pub fn parse_ranks(text: &str) -> Result<Vec<usize>, HarnessError> {
    let bad = || HarnessError::InvalidSpec(format!("cannot parse rank list `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let ranks: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, step, stop] = parts.as_slice() else {
            return Err(bad());
        };
        let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
        if step == 0 || start > stop {
            return Err(bad());
        }
        (start..=stop).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if ranks.is_empty() || ranks.contains(&0) {
        return Err(bad());
    }
    Ok(ranks)
}
