//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! Run alone with `cargo test --release --test acceptance`.

use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use irsvm::harness::{gen_instance, run_method, InstanceSpec};
use irsvm::objective::{DiagonalObjective, SquaredDistance};
use irsvm::solver::SolveTrace;
use irsvm::spectral::{diag_matrix, zero_threshold};
use irsvm::surrogate::{conjugate_exponent, f_eps, h_u, SmoothingParams};
use irsvm::{
    solve, weighted_sv_prox, CompletionProblem, ContinuationSchedule, DenseMatrix, SmoothObjective,
    SolverConfig, Variant,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

// Oracle singular values: nalgebra's values-only path, independent of the
// decomposition backend the crate uses.
fn oracle_sigma(x: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = x.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `<C, X - B> + (L/2)||X - B||^2 + sum_i s_i sigma_i(X)`.
fn prox_value(x: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, step: f64, w: &[f64]) -> f64 {
    let d = x - b;
    let penalty: f64 = oracle_sigma(x).iter().zip(w).map(|(s, wi)| s * wi).sum();
    c.dot(&d) + 0.5 * step * d.norm_squared() + penalty
}

fn prox_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let m = rng.random_range(1..=6);
        let n = rng.random_range(1..=6);
        let l = m.min(n);
        let b = gaussian(&mut rng, m, n);
        let c = gaussian(&mut rng, m, n);
        let step = rng.random_range(0.2..3.0);
        // Nondecreasing weights, the shape both reweighting rules produce.
        let mut w: Vec<f64> = (0..l)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..4.0) })
            .collect();
        w.sort_by(f64::total_cmp);
        let x = weighted_sv_prox(&b, &c, step, &w).unwrap().x;
        let value = prox_value(&x, &b, &c, step, &w);
        let center = &b - &c / step;
        let mut best = f64::INFINITY;
        for trial in 0..10_000 {
            let cand = match trial % 4 {
                0 => gaussian(&mut rng, m, n) * rng.random_range(0.0..2.0) * center.norm().max(1.0),
                1 => &center + gaussian(&mut rng, m, n) * 10f64.powf(rng.random_range(-3.0..0.0)),
                _ => &x + gaussian(&mut rng, m, n) * 10f64.powf(rng.random_range(-7.0..-1.0)),
            };
            best = best.min(prox_value(&cand, &b, &c, step, &w));
        }
        worst = worst.max(value - best);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 30.0,
        format!("max(prox - best candidate) = {worst:.3e} (<= 1e-8), {secs:.1} s (< 30 s)"),
    )
}

/// Grid minimum of `p (t s - s^q / q)` over `[0, u]`, refined by golden
/// section in the bracketing cells.
fn h_u_oracle(t: f64, u: f64, p: f64) -> f64 {
    let q = p / (p - 1.0);
    let phi = |s: f64| {
        if s <= 0.0 {
            f64::INFINITY
        } else {
            p * (t.abs() * s - s.powf(q) / q)
        }
    };
    const N: usize = 100_000;
    let h = u / N as f64;
    let (mut best_i, mut best) = (N, phi(u));
    for i in 1..N {
        let v = phi(i as f64 * h);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = ((best_i as f64 - 1.0) * h, ((best_i + 1) as f64 * h).min(u));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if phi(a) < phi(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.min(phi(0.5 * (lo + hi)))
}

fn h_u_grid() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let p = [0.3, 0.5, 0.7][i % 3];
        let t = rng.random_range(-5.0..5.0);
        let u = 10f64.powf(rng.random_range(-1.3..0.7));
        let got = h_u(t, u, p, conjugate_exponent(p)).unwrap();
        worst = worst.max((got - h_u_oracle(t, u, p)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && secs < 10.0,
        format!("max |closed form - grid| = {worst:.3e} (<= 1e-6), {secs:.1} s (< 10 s)"),
    )
}

fn sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (problem, _) = gen_instance(&InstanceSpec {
        m: 8,
        n: 6,
        rank: 2,
        sr: 0.5,
        seed: 3,
    })
    .unwrap();
    let mut worst_low = f64::INFINITY;
    let mut worst_high = f64::NEG_INFINITY;
    for i in 0..100 {
        let p = [0.3, 0.5, 0.7][i % 3];
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let eps = 10f64.powf(rng.random_range(-4.0..0.0));
        let params = SmoothingParams::new(eps, p, lambda, 6).unwrap();
        // Mix of scales so both branches of h_u are exercised.
        let scale = 10f64.powf(rng.random_range(-4.0..1.0));
        let x = gaussian(&mut rng, 8, 6) * scale;
        let f = problem.value(&x).unwrap();
        let big_f = f + lambda * oracle_sigma(&x).iter().map(|s| s.powf(p)).sum::<f64>();
        let gap = f_eps(&problem, &x, &params).unwrap() - big_f;
        let tol = 1e-12 * big_f.abs().max(1.0);
        worst_low = worst_low.min(gap + tol);
        worst_high = worst_high.max(gap - eps - tol);
    }
    let params = SmoothingParams::new(0.3, 0.5, 2.0, 6).unwrap();
    let zero = DenseMatrix::zeros(8, 6);
    let at_zero = f_eps(&problem, &zero, &params).unwrap() - problem.value(&zero).unwrap();
    let zero_err = (at_zero - (1.0 - 0.5) * 0.3).abs();
    outcome(
        worst_low >= 0.0 && worst_high <= 0.0 && zero_err <= 1e-10,
        format!(
            "min(gap) = {worst_low:.3e} (>= 0), max(gap - eps) = {worst_high:.3e} (<= 0), \
             |gap(0) - (1-p)eps| = {zero_err:.3e} (<= 1e-10)"
        ),
    )
}

/// Traces collected from every solver run in the suite.
#[derive(Default)]
struct RunLog {
    traces: Vec<SolveTrace>,
}

impl RunLog {
    fn extend(&mut self, stages: impl IntoIterator<Item = SolveTrace>) {
        self.traces.extend(stages);
    }
}

struct Recovery {
    rates: Vec<String>,
    all_ok: bool,
}

fn recovery_05(log: &mut RunLog) -> Recovery {
    let mut rates = Vec::new();
    let mut all_ok = true;
    for variant in [Variant::Irsvm1, Variant::Irsvm2] {
        let config = SolverConfig::default().with_variant(variant);
        for rank in [2, 5, 8] {
            let mut successes = 0;
            for seed in 0..20 {
                let (problem, truth) = gen_instance(&InstanceSpec {
                    m: 100,
                    n: 100,
                    rank,
                    sr: 0.5,
                    seed: 1000 + seed,
                })
                .unwrap();
                let (report, out) =
                    run_method(&problem, &truth, &config, &ContinuationSchedule::default()).unwrap();
                successes += usize::from(report.success);
                log.extend(out.stages);
            }
            all_ok &= successes >= 18;
            rates.push(format!("{variant} r={rank}: {successes}/20"));
        }
    }
    Recovery { rates, all_ok }
}

fn recovery_gap(log: &mut RunLog) -> Outcome {
    const SEEDS: u64 = 10;
    let mut cells = Vec::new();
    let mut found = false;
    for rank in [2, 5, 8] {
        let mut wins = [0usize; 3];
        for seed in 0..SEEDS {
            let (problem, truth) = gen_instance(&InstanceSpec {
                m: 100,
                n: 100,
                rank,
                sr: 0.2,
                seed: 5000 + seed,
            })
            .unwrap();
            for (slot, variant) in [Variant::Irsvm1, Variant::Irsvm2, Variant::Nuclear]
                .into_iter()
                .enumerate()
            {
                let mut config = SolverConfig::default().with_variant(variant);
                if variant == Variant::Nuclear {
                    // The baseline stops on relative step length; a tighter
                    // tolerance only helps it.
                    config.eps_bar = 1e-6;
                }
                let (report, out) =
                    run_method(&problem, &truth, &config, &ContinuationSchedule::default()).unwrap();
                wins[slot] += usize::from(report.success);
                if variant != Variant::Nuclear {
                    log.extend(out.stages);
                }
            }
        }
        let n = SEEDS as usize;
        let gap = wins[0] * 10 >= 9 * n && wins[1] * 10 >= 9 * n && wins[2] * 2 < n;
        found |= gap;
        cells.push(format!(
            "r={rank}: irsvm1 {}/{n}, irsvm2 {}/{n}, nuclear {}/{n}{}",
            wins[0],
            wins[1],
            wins[2],
            if gap { " (gap)" } else { "" }
        ));
    }
    outcome(found, format!("SR=0.2 {}", cells.join("; ")))
}

fn scalar_root(a: f64, lambda: f64, p: f64) -> f64 {
    let g = |x: f64| 2.0 * (x - a) + lambda * p * x.powf(p - 1.0);
    let (mut lo, mut hi) = (a / 2.0, a);
    assert!(g(lo) < 0.0 && g(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scalar_instance(log: &mut RunLog) -> (bool, String) {
    let (a, lambda, p) = (4.0, 0.5, 0.5);
    let root = scalar_root(a, lambda, p);
    let problem = CompletionProblem::from_pairs(&diag_matrix(1, 1, &[a]), [(0, 0)]).unwrap();
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for variant in [Variant::Irsvm1, Variant::Irsvm2] {
        let config = SolverConfig {
            lambda,
            p,
            eps_bar: 1e-8,
            variant,
            ..SolverConfig::default()
        };
        let out = solve(&problem, &problem.observed_matrix(), &config).unwrap();
        converged &= out.trace.converged;
        worst = worst.max((out.x[(0, 0)] - root).abs());
        log.extend([out.trace]);
    }
    (
        converged && worst <= 1e-4,
        format!("1x1 |x* - root| = {worst:.3e} (<= 1e-4, root {root:.6})"),
    )
}

fn singular_value_floor(log: &mut RunLog) -> Outcome {
    let mut runs = 0;
    let mut checked = 0;
    let mut worst_ratio = f64::INFINITY;
    let mut violations = 0;
    for variant in [Variant::Irsvm1, Variant::Irsvm2] {
        for lambda in [0.1, 1.0, 10.0] {
            for seed in 0..10 {
                let (problem, _) = gen_instance(&InstanceSpec {
                    m: 30,
                    n: 30,
                    rank: 3,
                    sr: 0.5,
                    seed: 300 + seed,
                })
                .unwrap();
                let config = SolverConfig {
                    lambda,
                    variant,
                    ..SolverConfig::default()
                };
                let out = solve(&problem, &problem.observed_matrix(), &config).unwrap();
                if out.trace.converged {
                    runs += 1;
                    let floor = out.trace.singular_value_floor();
                    let thr = zero_threshold(&out.sigma);
                    for &s in out.sigma.iter().filter(|&&s| s > thr) {
                        checked += 1;
                        worst_ratio = worst_ratio.min(s / floor);
                        violations += usize::from(s < floor);
                    }
                }
                log.extend([out.trace]);
            }
        }
    }
    outcome(
        runs >= 50 && violations == 0,
        format!(
            "{runs} converged runs (>= 50), {checked} nonzero singular values, \
             {violations} below floor, min sigma/floor = {worst_ratio:.3}"
        ),
    )
}

fn diagonal_equivalence(log: &mut RunLog) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_off: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut all_converged = true;
    for trial in 0..20 {
        let l = 2 + trial % 5;
        let target = DVector::from_fn(l, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            if rng.random_bool(0.3) { 0.05 * v } else { 2.0 * v }
        });
        let obj = DiagonalObjective::new(SquaredDistance {
            target: target.clone(),
        });
        let start: Vec<f64> = (0..l).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x0 = diag_matrix(l, l, &start);
        let lambda = [0.05, 0.5, 2.0][trial % 3];
        let p = [0.3, 0.5, 0.7][trial % 3];
        for variant in [Variant::Irsvm1, Variant::Irsvm2] {
            // Steps are capped at 1/l_max; with the default l_max = 1 below the
            // curvature 2 of h, the separable gradient step reflects about the
            // target and the iterates oscillate instead of converging.
            let config = SolverConfig {
                lambda,
                p,
                variant,
                l_max: 4.0,
                ..SolverConfig::default()
            };
            let out = solve(&obj, &x0, &config).unwrap();
            all_converged &= out.trace.converged;
            let x = &out.x;
            let off = x.norm_squared() - x.diagonal().norm_squared();
            worst_off = worst_off.max(off.max(0.0).sqrt() / x.norm().max(f64::MIN_POSITIVE));
            let d = x.diagonal();
            let vector_residual = d
                .iter()
                .zip(target.iter())
                .map(|(&xi, &ai)| (xi * 2.0 * (xi - ai) + lambda * p * xi.abs().powf(p)).abs())
                .fold(0.0, f64::max);
            let matrix_residual = out.trace.final_residual().unwrap();
            worst_gap = worst_gap.max((vector_residual - matrix_residual).abs());
            log.extend([out.trace]);
        }
    }
    outcome(
        all_converged && worst_off <= 1e-8 && worst_gap <= 1e-6,
        format!(
            "{}40 solves converged, off-diagonal mass / ||X||_F = {worst_off:.3e} (<= 1e-8), \
             |vector - matrix residual| = {worst_gap:.3e} (<= 1e-6)",
            if all_converged { "" } else { "NOT all " }
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_irsvm"))
            .args([
                "synth", "--m", "60", "--n", "50", "--rank", "4", "--sr", "0.4", "--seed", "123",
                "--method", "irsvm2",
            ])
            .output()
            .expect("binary runs");
        let text = String::from_utf8_lossy(&out.stdout).into_owned();
        text.split_whitespace()
            .find_map(|kv| kv.strip_prefix("rel_err="))
            .and_then(|v| v.parse::<f64>().ok())
    };
    match (run(), run()) {
        (Some(a), Some(b)) => outcome(
            (a - b).abs() <= 1e-12,
            format!("synth rel_err {a:.17e} vs {b:.17e} (|diff| <= 1e-12)"),
        ),
        _ => outcome(false, "synth did not report rel_err".into()),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut log = RunLog::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("prox oracle", prox_oracle()));
    results.push(("h_u grid oracle", h_u_grid()));
    results.push(("sandwich bound", sandwich()));

    let recovery = recovery_05(&mut log);
    let gap = recovery_gap(&mut log);
    let (scalar_ok, scalar_detail) = scalar_instance(&mut log);
    let floor = singular_value_floor(&mut log);
    let diagonal = diagonal_equivalence(&mut log);

    let irsvm: Vec<&SolveTrace> = log
        .traces
        .iter()
        .filter(|t| t.variant != Variant::Nuclear)
        .collect();
    let max_trials = irsvm.iter().map(|t| t.max_inner_iterations()).max().unwrap_or(0);
    let outer: usize = irsvm.iter().map(|t| t.iterations()).sum();
    results.push((
        "inner iteration bound",
        outcome(
            max_trials <= 8,
            format!(
                "max prox evaluations per outer iteration = {max_trials} (<= 8) over {} solves, \
                 {outer} outer iterations",
                irsvm.len()
            ),
        ),
    ));

    let converged: Vec<&&SolveTrace> = irsvm.iter().filter(|t| t.converged).collect();
    let worst_residual = converged
        .iter()
        .filter_map(|t| t.final_residual())
        .fold(0.0, f64::max);
    results.push((
        "stationarity",
        outcome(
            scalar_ok && worst_residual <= 1e-3,
            format!(
                "max final residual = {worst_residual:.3e} (<= 1e-3) over {} converged solves; \
                 {scalar_detail}",
                converged.len()
            ),
        ),
    ));
    results.push(("singular value lower bound", floor));
    results.push((
        "desk-scale recovery",
        outcome(
            recovery.all_ok && gap.pass,
            format!("SR=0.5 {} (>= 18/20 each); {}", recovery.rates.join(", "), gap.detail),
        ),
    ));
    results.push(("vector-matrix equivalence", diagonal));
    results.push(("determinism", determinism()));

    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        failed += usize::from(!r.pass);
        println!(
            "{} [{}] {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            i + 1,
            r.detail
        );
    }
    println!(
        "{} of {} criteria passed in {:.0} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
