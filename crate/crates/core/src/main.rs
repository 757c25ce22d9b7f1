use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irsvm::harness::io::{load_problem, save_matrix, save_problem, save_trace_jsonl};
use irsvm::harness::{
    gen_instance, parse_ranks, recovery_sweep, run_method, write_sweep_csv, HarnessError,
    InstanceSpec, RunReport, SweepSpec,
};
use irsvm::solver::ContinuationOutput;
use irsvm::{continuation_solve, ContinuationSchedule, SolverConfig, SolverError, Variant};

/// Low-rank matrix completion with Schatten-p quasi-norm regularization.
#[derive(Parser)]
#[command(name = "irsvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance, solve it and report the recovery error.
    Synth(SynthArgs),
    /// Recovery sweep over ranks; writes one CSV row per (method, rank).
    Sweep(SweepArgs),
    /// Complete a matrix from a triplet file.
    Solve(SolveArgs),
    /// Same as `solve` with the nuclear-norm baseline.
    Baseline(BaselineArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Lower clamp of the step curvature estimate.
    #[arg(long, default_value_t = 1e-2)]
    l_min: f64,
    /// Upper clamp of the step curvature estimate.
    #[arg(long, default_value_t = 1.0)]
    l_max: f64,
    /// Sufficient decrease constant.
    #[arg(long, default_value_t = 1e-4)]
    c: f64,
    /// Backtracking growth factor.
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    /// Nonmonotone window: compare against the last N+1 accepted values.
    #[arg(long, default_value_t = 10)]
    history: usize,
    /// Schatten exponent, in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    eps_bar: f64,
    /// Outer iteration limit per continuation stage.
    #[arg(long, default_value_t = 5000)]
    max_outer: usize,
    /// Absolute tolerance of the smoothing parameter search.
    #[arg(long, default_value_t = 1e-6)]
    eps_search_tol: f64,
    /// First continuation value of lambda.
    #[arg(long, default_value_t = 10.0)]
    lambda0: f64,
    /// Target lambda.
    #[arg(long, default_value_t = 1e-6)]
    lambda: f64,
    /// Per-stage lambda decay factor.
    #[arg(long, default_value_t = 0.1)]
    decay: f64,
    /// Smallest lambda reached by continuation.
    #[arg(long, default_value_t = 1e-6)]
    lambda_floor: f64,
}

impl SolverArgs {
    fn config(&self, variant: Variant) -> SolverConfig {
        SolverConfig {
            l_min: self.l_min,
            l_max: self.l_max,
            c: self.c,
            tau: self.tau,
            history: self.history,
            p: self.p,
            lambda: self.lambda,
            eps_bar: self.eps_bar,
            max_outer: self.max_outer,
            eps_search_tol: self.eps_search_tol,
            variant,
            ..SolverConfig::default()
        }
    }

    fn schedule(&self) -> ContinuationSchedule {
        ContinuationSchedule {
            lambda0: self.lambda0.max(self.lambda),
            target: self.lambda,
            decay: self.decay,
            floor: self.lambda_floor.min(self.lambda),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    rank: usize,
    /// Fraction of entries observed.
    #[arg(long, default_value_t = 0.5)]
    sr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// irsvm1, irsvm2 or nuclear.
    #[arg(long, default_value = "irsvm2")]
    method: Variant,
    /// Write the recovered matrix as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the observed entries as a triplet file.
    #[arg(long)]
    save_observed: Option<PathBuf>,
    /// Write per-iteration records as JSON lines.
    #[arg(long)]
    json_trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    sr: f64,
    /// `start:step:stop` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "2:2:20")]
    ranks: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "irsvm1,irsvm2")]
    methods: Vec<Variant>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct FileArgs {
    /// Triplet file: `row col value` per line, 0-based.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Write the recovered matrix as CSV.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write per-iteration records as JSON lines.
    #[arg(long)]
    json_trace: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "irsvm2")]
    method: Variant,
    #[command(flatten)]
    file: FileArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    file: FileArgs,
}

enum Failure {
    BadInput(String),
    Solver(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Solver(SolverError::InvalidConfig(_))
            | HarnessError::Solver(SolverError::ShapeMismatch { .. })
            | HarnessError::Solver(SolverError::NonFiniteStart)
            | HarnessError::Solver(SolverError::Objective(_)) => Failure::BadInput(e.to_string()),
            HarnessError::Solver(_) => Failure::Solver(e.to_string()),
            _ => Failure::BadInput(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        HarnessError::from(e).into()
    }
}

fn write_outputs(
    out: &ContinuationOutput,
    output: Option<&PathBuf>,
    trace: Option<&PathBuf>,
) -> Result<(), HarnessError> {
    if let Some(path) = output {
        save_matrix(&out.x, path)?;
    }
    if let Some(path) = trace {
        save_trace_jsonl(&out.stages, path)?;
    }
    Ok(())
}

fn print_report(r: &RunReport) {
    println!(
        "method={} rel_err={:.17e} success={} rank={} iterations={} seconds={:.3} converged={}",
        r.method, r.rel_err, r.success, r.rank, r.iterations, r.seconds, r.converged
    );
}

fn synth(args: SynthArgs) -> Result<bool, Failure> {
    let spec = InstanceSpec {
        m: args.m,
        n: args.n,
        rank: args.rank,
        sr: args.sr,
        seed: args.seed,
    };
    let (problem, truth) = gen_instance(&spec)?;
    if let Some(path) = &args.save_observed {
        save_problem(&problem, path)?;
    }
    let config = args.solver.config(args.method);
    let (report, out) = run_method(&problem, &truth, &config, &args.solver.schedule())?;
    write_outputs(&out, args.output.as_ref(), args.json_trace.as_ref())?;
    print_report(&report);
    Ok(report.converged)
}

fn sweep(args: SweepArgs) -> Result<bool, Failure> {
    if args.trials == 0 {
        return Err(Failure::BadInput("--trials must be at least 1".into()));
    }
    let spec = SweepSpec {
        m: args.m,
        n: args.n,
        sr: args.sr,
        ranks: parse_ranks(&args.ranks)?,
        trials: args.trials,
        methods: args.methods,
        base_seed: args.seed,
    };
    let config = args.solver.config(Variant::Irsvm2);
    let (rows, records) = recovery_sweep(&spec, &config, &args.solver.schedule())?;
    for r in records.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} rank {} trial {} failed: {}",
            r.method,
            r.rank,
            r.trial,
            r.error.as_deref().unwrap_or_default()
        );
    }
    match &args.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
                path: path.display().to_string(),
                source,
            })?;
            write_sweep_csv(&rows, file)?;
        }
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(true)
}

fn solve_file(args: FileArgs, method: Variant) -> Result<bool, Failure> {
    let problem = load_problem(&args.input, args.rows, args.cols)?;
    let config = args.solver.config(method);
    let x0 = problem.observed_matrix();
    let out = continuation_solve(&problem, &x0, &config, &args.solver.schedule())?;
    write_outputs(&out, args.output.as_ref(), args.json_trace.as_ref())?;
    println!(
        "method={} rank={} iterations={} converged={}",
        method,
        irsvm::spectral::numerical_rank(&out.sigma),
        out.total_iterations(),
        out.converged()
    );
    Ok(out.converged())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Solve(a) => solve_file(a.file, a.method),
        Command::Baseline(a) => solve_file(a.file, Variant::Nuclear),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: solver did not converge within the iteration limit");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::BadInput(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
