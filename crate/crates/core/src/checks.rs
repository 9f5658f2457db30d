//! Executable invariant suite.
//!
//! Every property the modules promise is implemented here as a check that
//! returns a pass/fail verdict plus a human-readable detail string. The CLI
//! `check` command prints the table; the test suites assert on the same
//! functions, so there is one implementation of each audit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bench::{
    make_election, make_pl_sine, make_quadratic_sc, make_strategic_classification,
    quadratic_sc_primal, ProblemInstance,
};
use crate::core::{ConstraintSet, DecisionPair};
use crate::distmap::{LocationScaleMap, MapEstimate};
use crate::error::Result;
use crate::gradients::{g_x_plugin, g_y_plugin, minibatch};
use crate::metrics::{fd_check, inner_max, moreau_grad, primal_grad, INNER_TOL, PROX_TOL};
use crate::solvers::{asgda_run, run, Algo, RunConfig, Schedule};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(module: &'static str, name: &'static str, passed: bool, detail: String) -> Self {
        CheckResult {
            module,
            name,
            passed,
            detail,
        }
    }
}

/// Run the whole suite, or only the checks of one module.
pub fn run_all(only_module: Option<&str>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let want = |m: &str| only_module.map(|f| f == m).unwrap_or(true);
    if want("core") {
        out.push(projection_idempotent());
        out.push(projection_nonexpansive());
        out.push(simplex_feasibility());
        out.push(box_diameter());
    }
    if want("distmap") {
        out.push(sampling_determinism());
        out.push(sampler_first_moment());
        out.push(noiseless_exact_recovery());
        out.push(noisy_recovery());
        out.push(estimation_error_decay());
        out.push(sufficient_statistic_consistency());
        out.push(map_kv_round_trip());
    }
    if want("gradients") {
        let p = make_quadratic_sc();
        out.push(unbiasedness_check(&p));
        out.push(bias_bound_check(&p));
        out.push(variance_bound_check(&p, &[10, 100]));
        out.push(single_sample_bounds_check(&p));
        out.push(integrand_gradient_consistency());
    }
    if want("solvers") {
        out.push(sample_budget_check());
        out.push(estimator_lag_check());
        out.push(iterate_feasibility_check());
        out.push(contraction_recursion_check());
        out.push(run_determinism_check());
        out.push(exact_oracle_descent_check());
    }
    if want("metrics") {
        let p = make_quadratic_sc();
        out.push(danskin_check(&p, -6.0, 6.0, 41));
        let sine = make_pl_sine();
        out.push(danskin_check(&sine, -3.0, 3.0, 43));
        out.push(primal_closed_form_check());
        out.push(moreau_fixed_point_check());
        out.push(moreau_offset_invariance_check());
    }
    if want("bench") {
        out.push(closed_form_crosscheck());
        out.push(smoothness_audit());
        out.push(pl_audit_quadratic());
        out.push(pl_audit_sine_nominal_modulus());
    }
    out
}

pub fn module_names() -> &'static [&'static str] {
    &["core", "distmap", "gradients", "solvers", "metrics", "bench"]
}

// ---------------------------------------------------------------- core --

fn sets_under_test() -> Vec<ConstraintSet> {
    vec![
        ConstraintSet::Unconstrained,
        ConstraintSet::box_set(DVector::from_element(4, -2.0), DVector::from_element(4, 3.0))
            .unwrap(),
        ConstraintSet::simplex(4).unwrap(),
        ConstraintSet::ball(DVector::from_element(4, 0.5), 1.5).unwrap(),
    ]
}

fn projection_idempotent() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for set in sets_under_test() {
        for _ in 0..200 {
            let v = DVector::from_fn(4, |_, _| rng.random_range(-10.0..10.0));
            let p1 = set.project(&v).unwrap();
            let p2 = set.project(&p1).unwrap();
            worst = worst.max((&p1 - &p2).norm());
        }
    }
    CheckResult::new(
        "core",
        "projection_idempotent",
        worst == 0.0,
        format!("max |P(P(v)) - P(v)| = {worst:.3e} (exact zero required)"),
    )
}

fn projection_nonexpansive() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = f64::NEG_INFINITY;
    for set in sets_under_test() {
        for _ in 0..200 {
            let u = DVector::from_fn(4, |_, _| rng.random_range(-10.0..10.0));
            let v = DVector::from_fn(4, |_, _| rng.random_range(-10.0..10.0));
            let lhs = (set.project(&u).unwrap() - set.project(&v).unwrap()).norm();
            let rhs = (&u - &v).norm();
            worst = worst.max(lhs - rhs);
        }
    }
    CheckResult::new(
        "core",
        "projection_nonexpansive",
        worst <= 1e-12,
        format!("max |Pu - Pv| - |u - v| = {worst:.3e}"),
    )
}

fn simplex_feasibility() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let set = ConstraintSet::simplex(6).unwrap();
    let mut worst_sum = 0.0f64;
    let mut worst_neg = 0.0f64;
    for _ in 0..500 {
        let v = DVector::from_fn(6, |_, _| rng.random_range(-10.0..10.0));
        let p = set.project(&v).unwrap();
        worst_sum = worst_sum.max((p.sum() - 1.0).abs());
        worst_neg = worst_neg.min(p.min());
    }
    CheckResult::new(
        "core",
        "simplex_feasibility",
        worst_sum <= 1e-12 && worst_neg >= 0.0,
        format!("max |sum - 1| = {worst_sum:.3e}, min entry = {worst_neg:.3e}"),
    )
}

fn box_diameter() -> CheckResult {
    let set = ConstraintSet::box_set(
        DVector::from_element(1, -10.0),
        DVector::from_element(1, 10.0),
    )
    .unwrap();
    let d = set.diameter();
    CheckResult::new(
        "core",
        "box_diameter",
        d == 20.0,
        format!("diameter of [-10,10] = {d}"),
    )
}

// ------------------------------------------------------------- distmap --

fn sampling_determinism() -> CheckResult {
    let p = make_quadratic_sc();
    let mut r1 = ChaCha8Rng::seed_from_u64(7);
    let mut r2 = ChaCha8Rng::seed_from_u64(7);
    let x = DVector::from_element(1, 0.4);
    let y = DVector::from_element(1, -1.2);
    let s1 = p.truth.sample(&x, &y, 64, &mut r1).unwrap();
    let s2 = p.truth.sample(&x, &y, 64, &mut r2).unwrap();
    let identical = s1 == s2;
    CheckResult::new(
        "distmap",
        "sampling_determinism",
        identical,
        "identical seeds reproduce bitwise-identical samples".into(),
    )
}

fn sampler_first_moment() -> CheckResult {
    let p = make_quadratic_sc();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = 100_000usize;
    let x = DVector::from_element(1, 1.0);
    let y = DVector::from_element(1, 1.0);
    let samples = p.truth.sample(&x, &y, m, &mut rng).unwrap();
    let mean = samples.iter().map(|s| s.z[0]).sum::<f64>() / m as f64;
    let tol = 5.0 / (m as f64).sqrt();
    let err = (mean - 3.0).abs();
    CheckResult::new(
        "distmap",
        "sampler_first_moment",
        err <= tol,
        format!("|mean - 3| = {err:.2e} vs 5 sigma/sqrt(M) = {tol:.2e}"),
    )
}

fn noiseless_exact_recovery() -> CheckResult {
    let truth = LocationScaleMap::new(
        DMatrix::from_row_slice(1, 1, &[4.0]),
        DMatrix::from_row_slice(1, 1, &[-1.0]),
        DVector::zeros(1),
        DVector::zeros(1),
    )
    .unwrap();
    let mut est = MapEstimate::new(1, 1, 1, 1e-9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (x, y) in [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
        let xv = DVector::from_element(1, x);
        let yv = DVector::from_element(1, y);
        let batch = truth.sample(&xv, &yv, 1, &mut rng).unwrap();
        est.ols_update(&xv, &yv, &batch).unwrap();
    }
    let (ex, ey) = est.estimation_error(&truth);
    CheckResult::new(
        "distmap",
        "noiseless_exact_recovery",
        ex <= 1e-6 && ey <= 1e-6,
        format!("errors after p independent probes: ({ex:.2e}, {ey:.2e})"),
    )
}

fn noisy_recovery() -> CheckResult {
    let p = make_quadratic_sc();
    let mut est = MapEstimate::zeroed_for(&p.truth);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10_000 {
        let x = DVector::from_element(1, rng.random_range(-5.0..5.0));
        let y = DVector::from_element(1, rng.random_range(-5.0..5.0));
        let batch = p.truth.sample(&x, &y, 1, &mut rng).unwrap();
        est.ols_update(&x, &y, &batch).unwrap();
    }
    let (ex, ey) = est.estimation_error(&p.truth);
    CheckResult::new(
        "distmap",
        "noisy_recovery",
        ex + ey <= 0.05,
        format!("|A_hat - A|_F + |B_hat - B|_F = {:.4}", ex + ey),
    )
}

/// Feed the learner probes that spiral in like converging iterates and
/// confirm the estimation error trends down. The decay bound being audited
/// is on the expected error, so checkpoints are averaged across independent
/// replications before the window smoothing.
fn estimation_error_decay() -> CheckResult {
    let p = make_quadratic_sc();
    let updates = 10_000usize;
    let checkpoint_every = 100usize;
    let replications = 30usize;
    let n_checkpoints = updates / checkpoint_every;
    let mut mean_checkpoints = vec![0.0f64; n_checkpoints];
    for rep in 0..replications {
        let mut est = MapEstimate::zeroed_for(&p.truth);
        let mut rng = ChaCha8Rng::seed_from_u64(77 + rep as u64);
        for k in 0..updates {
            let scale = 5.0 * (0.9998f64).powi(k as i32);
            let jx: f64 = StandardNormal.sample(&mut rng);
            let jy: f64 = StandardNormal.sample(&mut rng);
            let x = DVector::from_element(1, scale * (1.0 + 0.2 * jx));
            let y = DVector::from_element(1, scale * (-0.8 + 0.2 * jy));
            let batch = p.truth.sample(&x, &y, 1, &mut rng).unwrap();
            est.ols_update(&x, &y, &batch).unwrap();
            if (k + 1) % checkpoint_every == 0 {
                let (ex, ey) = est.estimation_error(&p.truth);
                mean_checkpoints[(k + 1) / checkpoint_every - 1] +=
                    (ex + ey) / replications as f64;
            }
        }
    }
    let window = 10usize;
    let smoothed: Vec<f64> = mean_checkpoints
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mut monotone = true;
    for w in smoothed.windows(2) {
        if w[1] > w[0] + 1e-12 {
            monotone = false;
        }
    }
    CheckResult::new(
        "distmap",
        "estimation_error_decay",
        monotone,
        format!(
            "smoothed window means over {replications} replications: first {:.3}, last {:.4}, monotone: {monotone}",
            smoothed.first().unwrap(),
            smoothed.last().unwrap()
        ),
    )
}

fn sufficient_statistic_consistency() -> CheckResult {
    let p = make_quadratic_sc();
    let mut est = MapEstimate::zeroed_for(&p.truth);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x = DVector::from_element(1, rng.random_range(-2.0..2.0));
        let y = DVector::from_element(1, rng.random_range(-2.0..2.0));
        let batch = p.truth.sample(&x, &y, 3, &mut rng).unwrap();
        est.ols_update(&x, &y, &batch).unwrap();
    }
    let before = (
        est.jacobians().0.clone(),
        est.jacobians().1.clone(),
        est.intercept().clone(),
    );
    est.resolve().unwrap();
    let gap = (est.jacobians().0 - &before.0).norm()
        + (est.jacobians().1 - &before.1).norm()
        + (est.intercept() - &before.2).norm();
    CheckResult::new(
        "distmap",
        "sufficient_statistic_consistency",
        gap <= 1e-10,
        format!("re-solve drift: {gap:.3e}"),
    )
}

fn map_kv_round_trip() -> CheckResult {
    let p = make_quadratic_sc();
    let text = p.truth.to_kv();
    let back = LocationScaleMap::from_kv(&text).unwrap();
    let same = p.truth.jacobians().0 == back.jacobians().0
        && p.truth.jacobians().1 == back.jacobians().1
        && p.truth.noise_mean() == back.noise_mean()
        && p.truth.noise_std() == back.noise_std();
    CheckResult::new(
        "distmap",
        "map_kv_round_trip",
        same,
        "plain-text serialization round-trips bit-exactly".into(),
    )
}

// ----------------------------------------------------------- gradients --

/// Monte-Carlo mean of the plug-in gradient with exact Jacobians must match
/// the closed-form gradient within 5 standard errors.
pub fn unbiasedness_check(problem: &ProblemInstance) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x = DVector::from_element(problem.n, 1.0);
    let y = DVector::from_element(problem.m, 0.0);
    let m = 100_000usize;
    let batch = problem.truth.sample(&x, &y, m, &mut rng).unwrap();
    let (jx, jy) = problem.truth.jacobians();
    let mut sum_x = DVector::zeros(problem.n);
    let mut sq_x = 0.0;
    let mut sum_y = DVector::zeros(problem.m);
    let mut sq_y = 0.0;
    for s in &batch {
        let gx = g_x_plugin(&problem.loss, jx, &x, &y, s).unwrap();
        let gy = g_y_plugin(&problem.loss, jy, &x, &y, s).unwrap();
        sq_x += gx.norm_squared();
        sq_y += gy.norm_squared();
        sum_x += gx;
        sum_y += gy;
    }
    let k = m as f64;
    let mean_x = sum_x / k;
    let mean_y = sum_y / k;
    let se_x = ((sq_x / k - mean_x.norm_squared()).max(0.0) / k).sqrt();
    let se_y = ((sq_y / k - mean_y.norm_squared()).max(0.0) / k).sqrt();
    let (gx, gy) = match problem.true_grad(&x, &y, None) {
        Ok(g) => {
            let (a, b) = g.parts();
            (a.clone(), b.clone())
        }
        Err(e) => return CheckResult::new("gradients", "unbiased_under_true_map", false, e.to_string()),
    };
    let err_x = (&mean_x - &gx).norm();
    let err_y = (&mean_y - &gy).norm();
    let pass = err_x <= 5.0 * se_x.max(1e-12) && err_y <= 5.0 * se_y.max(1e-12);
    CheckResult::new(
        "gradients",
        "unbiased_under_true_map",
        pass,
        format!("x gap {err_x:.2e} (5se {:.2e}), y gap {err_y:.2e} (5se {:.2e})", 5.0 * se_x, 5.0 * se_y),
    )
}

/// Closed-form bias of a perturbed-Jacobian gradient stays within the
/// first-moment bound `L1 |delta|_F`, with `L1` measured over the box.
pub fn bias_bound_check(problem: &ProblemInstance) -> CheckResult {
    // Empirical first-moment constant: sup over the evaluation box of
    // |E grad_z l| (exact for the quadratic benchmark: |y - x|).
    let mut l1 = 0.0f64;
    let grid = 21;
    for i in 0..grid {
        for j in 0..grid {
            let x = -10.0 + 20.0 * i as f64 / (grid - 1) as f64;
            let y = -10.0 + 20.0 * j as f64 / (grid - 1) as f64;
            l1 = l1.max((y - x).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst_margin = f64::NEG_INFINITY;
    let mut pass = true;
    for _ in 0..20 {
        let delta: f64 = rng.random_range(-2.0..2.0);
        let x: f64 = rng.random_range(-10.0..10.0);
        let y: f64 = rng.random_range(-10.0..10.0);
        // E[G_x with J+delta] - grad_x L = delta * E grad_z l = delta (y-x)
        let bias = (delta * (y - x)).abs();
        let bound = l1 * delta.abs();
        worst_margin = worst_margin.max(bias - bound);
        if bias > bound + 1e-12 {
            pass = false;
        }
    }
    let _ = problem;
    CheckResult::new(
        "gradients",
        "bias_bound",
        pass,
        format!("L1 over box = {l1}, worst bias - bound = {worst_margin:.3e}"),
    )
}

/// Empirical minibatch variance stays within `1.1 (1 + |J|_F^2) sigma^2 / M`.
pub fn variance_bound_check(problem: &ProblemInstance, batch_sizes: &[usize]) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let sigma2 = problem.profile.sigma * problem.profile.sigma;
    let reps = 1000usize;
    let x = DVector::from_element(problem.n, 1.0);
    let y = DVector::from_element(problem.m, -2.0);
    let mut detail = String::new();
    let mut pass = true;
    for &m in batch_sizes {
        let delta: f64 = rng.random_range(-2.0..2.0);
        let (jx_true, jy_true) = problem.truth.jacobians();
        let jx = jx_true.map(|v| v + delta);
        let jy = jy_true.map(|v| v + delta);
        for which in ["x", "y"] {
            let mut means = Vec::with_capacity(reps);
            for _ in 0..reps {
                let batch = problem.truth.sample(&x, &y, m, &mut rng).unwrap();
                let g = if which == "x" {
                    minibatch(|s| g_x_plugin(&problem.loss, &jx, &x, &y, s), &batch).unwrap()
                } else {
                    minibatch(|s| g_y_plugin(&problem.loss, &jy, &x, &y, s), &batch).unwrap()
                };
                means.push(g);
            }
            let mut center = DVector::zeros(means[0].len());
            for g in &means {
                center += g;
            }
            center /= reps as f64;
            let var = means
                .iter()
                .map(|g| (g - &center).norm_squared())
                .sum::<f64>()
                / reps as f64;
            let jnorm2 = if which == "x" {
                jx.norm_squared()
            } else {
                jy.norm_squared()
            };
            let bound = 1.1 * (1.0 + jnorm2) * sigma2 / m as f64;
            if var > bound {
                pass = false;
            }
            detail.push_str(&format!("[{which}, M={m}: var {var:.3e} <= {bound:.3e}] "));
        }
    }
    CheckResult::new("gradients", "variance_bound", pass, detail)
}

/// Single-sample analogues of the bias/variance bounds (batch size 1).
pub fn single_sample_bounds_check(problem: &ProblemInstance) -> CheckResult {
    let inner = variance_bound_check(problem, &[1]);
    CheckResult::new(
        "gradients",
        "single_sample_bounds",
        inner.passed,
        inner.detail,
    )
}

/// Central finite differences of the integrand against its claimed partial
/// gradients, all benchmarks, 20 random points each.
fn integrand_gradient_consistency() -> CheckResult {
    let problems = vec![
        make_quadratic_sc(),
        make_pl_sine(),
        make_election(4, 3, 11, 0.3).unwrap(),
        make_strategic_classification(8, 4, 11).unwrap(),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for p in &problems {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let x = DVector::from_fn(p.n, |_, _| rng.random_range(-0.8..0.8));
            let y0 = DVector::from_fn(p.m, |_, _| rng.random_range(0.01..1.0));
            let y = match &p.y_set {
                ConstraintSet::Simplex { .. } => p.y_set.project(&y0).unwrap(),
                _ => DVector::from_fn(p.m, |_, _| rng.random_range(-0.8..0.8)),
            };
            let sample = p.truth.sample(&x, &y, 1, &mut rng).unwrap().remove(0);
            let h = 1e-5;
            // x-gradient
            let gap_x = fd_check(
                |xv| (p.loss.eval)(xv, &y, &sample),
                |xv| (p.loss.grad_x)(xv, &y, &sample),
                &x,
                h,
            );
            // y-gradient
            let gap_y = fd_check(
                |yv| (p.loss.eval)(&x, yv, &sample),
                |yv| (p.loss.grad_y)(&x, yv, &sample),
                &y,
                h,
            );
            // z-gradient: perturb the sample outcome
            let gap_z = fd_check(
                |zv| {
                    let s2 = crate::distmap::Sample {
                        z: zv.clone(),
                        theta: sample.theta.clone(),
                    };
                    (p.loss.eval)(&x, &y, &s2)
                },
                |zv| {
                    let s2 = crate::distmap::Sample {
                        z: zv.clone(),
                        theta: sample.theta.clone(),
                    };
                    (p.loss.grad_z)(&x, &y, &s2)
                },
                &sample.z,
                h,
            );
            worst = worst.max(gap_x).max(gap_y).max(gap_z);
        }
        if worst > 1e-6 {
            pass = false;
        }
        detail.push_str(&format!("[{}: worst fd gap {worst:.2e}] ", p.name));
    }
    CheckResult::new("gradients", "integrand_gradient_consistency", pass, detail)
}

// ------------------------------------------------------------- solvers --

fn sample_budget_check() -> CheckResult {
    let p = make_quadratic_sc();
    let cfg = RunConfig::new(
        Algo::Asgda,
        11,
        17,
        Schedule::NcSc,
        3,
        DecisionPair::from_slices(&[1.0], &[0.5]).unwrap(),
    );
    let trace = run(&p, &cfg).unwrap();
    let asgda_ok = trace.env_samples == 11 * 17 && trace.estimator_updates == 11;

    let sine = make_pl_sine();
    let cfg2 = RunConfig::new(
        Algo::Aasgda,
        13,
        1,
        Schedule::NcPl,
        3,
        DecisionPair::from_slices(&[1.0], &[0.5]).unwrap(),
    );
    let t2 = run(&sine, &cfg2).unwrap();
    let mut cfg3 = cfg2.clone();
    cfg3.aasgda_three_draw = true;
    let t3 = run(&sine, &cfg3).unwrap();
    let aasgda_ok = t2.env_samples == 2 * 13 && t3.env_samples == 3 * 13;
    CheckResult::new(
        "solvers",
        "sample_budget",
        asgda_ok && aasgda_ok,
        format!(
            "asgda {}/{} samples, aasgda reuse {} literal {}",
            trace.env_samples,
            11 * 17,
            t2.env_samples,
            t3.env_samples
        ),
    )
}

fn estimator_lag_check() -> CheckResult {
    // With a zero initial estimate the first x-update must follow the
    // naive gradient (the map correction only enters from iteration 1).
    let p = make_quadratic_sc();
    let truth = LocationScaleMap::new(
        p.truth.jacobians().0.clone(),
        p.truth.jacobians().1.clone(),
        DVector::zeros(1),
        DVector::zeros(1),
    )
    .unwrap();
    let eta_x = 1e-3;
    let cfg = RunConfig::new(
        Algo::Asgda,
        1,
        1,
        Schedule::Fixed {
            eta_x,
            eta_y: 0.0,
        },
        1,
        DecisionPair::from_slices(&[1.0], &[0.0]).unwrap(),
    );
    let trace = asgda_run(&p, &truth, MapEstimate::zeroed_for(&p.truth), &cfg).unwrap();
    let x1 = trace.records[1].x[0];
    let naive = 1.0 - eta_x * (-4.0);
    let corrected = 1.0 - eta_x * (-8.0);
    let pass = (x1 - naive).abs() < 1e-12 && (x1 - corrected).abs() > 1e-6;
    CheckResult::new(
        "solvers",
        "estimator_lag",
        pass,
        format!("x1 = {x1:.6} (naive {naive:.6}, corrected {corrected:.6})"),
    )
}

fn iterate_feasibility_check() -> CheckResult {
    let p = make_quadratic_sc();
    let cfg = RunConfig::new(
        Algo::Asgda,
        300,
        4,
        Schedule::Fixed {
            eta_x: 1e-3,
            eta_y: 0.4,
        },
        21,
        DecisionPair::from_slices(&[5.0], &[9.0]).unwrap(),
    );
    let trace = run(&p, &cfg).unwrap();
    let ok_box = trace.records.iter().all(|r| p.y_set.contains(&r.y, 1e-12));

    let strat = make_strategic_classification(10, 4, 3).unwrap();
    let cfg2 = RunConfig::new(
        Algo::Asgda,
        50,
        4,
        Schedule::Fixed {
            eta_x: 1e-3,
            eta_y: 1e-1,
        },
        22,
        DecisionPair::new(DVector::zeros(4), DVector::from_element(10, 0.1)).unwrap(),
    );
    let t2 = run(&strat, &cfg2).unwrap();
    let ok_simplex = t2.records.iter().all(|r| strat.y_set.contains(&r.y, 1e-9));
    CheckResult::new(
        "solvers",
        "iterate_feasibility",
        ok_box && ok_simplex,
        format!("box feasible: {ok_box}, simplex feasible: {ok_simplex}"),
    )
}

/// One-step contraction of projected stochastic ascent with injected bias
/// and variance, against the recursion bound
/// `(1 - mu/(2(mu+L))) dist^2 + (1/(2(mu+L)^2) + 1/(2 mu L)) C^2 + D/(4(mu+L)^2)`.
pub fn contraction_recursion_check() -> CheckResult {
    let mu = 3.0;
    let ell = 12.0;
    let q = DMatrix::from_diagonal(&DVector::from_row_slice(&[mu, ell]));
    let center = DVector::from_row_slice(&[1.0, -2.0]);
    let eta = 1.0 / (2.0 * (mu + ell));
    let contraction = 1.0 - mu / (2.0 * (mu + ell));
    let c_coef = 1.0 / (2.0 * (mu + ell) * (mu + ell)) + 1.0 / (2.0 * mu * ell);
    let d_coef = 1.0 / (4.0 * (mu + ell) * (mu + ell));

    let grad = |y: &DVector<f64>| &q * (y - &center);

    let scenarios: Vec<(ConstraintSet, DVector<f64>)> = vec![
        // interior optimum
        (
            ConstraintSet::box_set(DVector::from_element(2, -10.0), DVector::from_element(2, 10.0))
                .unwrap(),
            center.clone(),
        ),
        // active constraint: optimum clipped to the box corner
        (
            ConstraintSet::box_set(DVector::from_element(2, -0.5), DVector::from_element(2, 0.5))
                .unwrap(),
            {
                // solve the constrained problem by projected descent
                let set = ConstraintSet::box_set(
                    DVector::from_element(2, -0.5),
                    DVector::from_element(2, 0.5),
                )
                .unwrap();
                let mut y = DVector::zeros(2);
                for _ in 0..10_000 {
                    let g = &q * (&y - &center);
                    y = set.project(&(&y - g * (1.0 / ell))).unwrap();
                }
                y
            },
        ),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let reps = 1000usize;
    let mut pass = true;
    let mut worst = f64::NEG_INFINITY;
    for (set, y_star) in &scenarios {
        for &(c_bias, d_var) in &[(0.0f64, 1.0f64), (0.5, 0.0), (0.5, 1.0), (0.0, 0.0)] {
            for start in [
                DVector::from_row_slice(&[3.0, 2.0]),
                y_star.clone(),
                DVector::from_row_slice(&[-5.0, 4.0]),
            ] {
                let y_t = set.project(&start).unwrap();
                let dist2 = (&y_t - y_star).norm_squared();
                let bias_dir = DVector::from_row_slice(&[1.0, 1.0]).normalize() * c_bias;
                let mut vals = Vec::with_capacity(reps);
                for _ in 0..reps {
                    let noise = DVector::from_fn(2, |_, _| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        (d_var / 2.0).sqrt() * e
                    });
                    let g = grad(&y_t) + &bias_dir + noise;
                    let y_next = set.project(&(&y_t - g * eta)).unwrap();
                    vals.push((&y_next - y_star).norm_squared());
                }
                let mean = vals.iter().sum::<f64>() / reps as f64;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / reps as f64;
                let se = (var / reps as f64).sqrt();
                let bound = contraction * dist2 + c_coef * c_bias * c_bias + d_coef * d_var;
                let margin = mean - (bound + 3.0 * se);
                worst = worst.max(margin);
                if margin > 0.0 {
                    pass = false;
                }
            }
        }
    }
    CheckResult::new(
        "solvers",
        "contraction_recursion",
        pass,
        format!("worst (mean - bound - 3se) = {worst:.3e}"),
    )
}

fn run_determinism_check() -> CheckResult {
    let p = make_quadratic_sc();
    let cfg = RunConfig::new(
        Algo::Asgda,
        60,
        8,
        Schedule::NcSc,
        999,
        DecisionPair::from_slices(&[5.0], &[5.0]).unwrap(),
    );
    let a = run(&p, &cfg).unwrap().to_csv();
    let b = run(&p, &cfg).unwrap().to_csv();
    CheckResult::new(
        "solvers",
        "run_determinism",
        a == b,
        format!("two runs, {} bytes each, byte-identical: {}", a.len(), a == b),
    )
}

pub fn exact_oracle_descent_check() -> CheckResult {
    let p = make_quadratic_sc();
    let truth = LocationScaleMap::new(
        p.truth.jacobians().0.clone(),
        p.truth.jacobians().1.clone(),
        DVector::zeros(1),
        DVector::zeros(1),
    )
    .unwrap();
    // exact estimate via noiseless probes, tiny ridge
    let mut est = MapEstimate::new(1, 1, 1, 1e-12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (x, y) in [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)] {
        let xv = DVector::from_element(1, x);
        let yv = DVector::from_element(1, y);
        let batch = truth.sample(&xv, &yv, 1, &mut rng).unwrap();
        est.ols_update(&xv, &yv, &batch).unwrap();
    }
    let mut cfg = RunConfig::new(
        Algo::Asgda,
        500,
        1,
        Schedule::NcSc,
        2,
        DecisionPair::from_slices(&[5.0], &[5.0]).unwrap(),
    );
    cfg.metric_stride = 5;
    let trace = asgda_run(&p, &truth, est, &cfg).unwrap();
    let phis: Vec<(usize, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.phi.map(|v| (r.t, v)))
        .collect();
    let mut pass = true;
    // two-timescale transient on this problem: ~25 iterations
    for w in phis.windows(2) {
        if w[0].0 >= 30 && w[1].1 > w[0].1 + 1e-12 {
            pass = false;
        }
    }
    CheckResult::new(
        "solvers",
        "exact_oracle_descent",
        pass,
        format!(
            "primal value monotone after transient over {} checkpoints",
            phis.len()
        ),
    )
}

// ------------------------------------------------------------- metrics --

/// Danskin identity versus finite differences of the inner value.
pub fn danskin_check(problem: &ProblemInstance, lo: f64, hi: f64, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let x = DVector::from_element(1, rng.random_range(lo..hi));
        let gap = fd_check(
            |xv| inner_max(problem, xv, INNER_TOL).unwrap().value,
            |xv| primal_grad(problem, xv, INNER_TOL).unwrap(),
            &x,
            1e-5,
        );
        worst = worst.max(gap);
    }
    let pass = worst <= 1e-4;
    CheckResult::new(
        "metrics",
        "danskin_consistency",
        pass,
        format!("{}: worst normalized fd gap {worst:.2e}", problem.name),
    )
}

fn primal_closed_form_check() -> CheckResult {
    let p = make_quadratic_sc();
    let mut worst = 0.0f64;
    for i in 0..100 {
        let x = -8.0 + 16.0 * i as f64 / 99.0;
        let xv = DVector::from_element(1, x);
        let got = inner_max(&p, &xv, INNER_TOL).unwrap().value;
        worst = worst.max((got - quadratic_sc_primal(x)).abs());
    }
    CheckResult::new(
        "metrics",
        "primal_closed_form",
        worst <= 1e-8,
        format!("max |inner_max - piecewise| over 100 grid points = {worst:.2e}"),
    )
}

fn moreau_fixed_point_check() -> CheckResult {
    let p = make_quadratic_sc();
    let x = DVector::from_element(1, 0.0);
    let g = moreau_grad(&p, &x, 12.0, PROX_TOL).unwrap();
    CheckResult::new(
        "metrics",
        "moreau_fixed_point",
        g <= PROX_TOL,
        format!("moreau gradient at the minimizer = {g:.2e}"),
    )
}

fn moreau_offset_invariance_check() -> CheckResult {
    let base = make_quadratic_sc();
    let offset = 37.5;
    let mut shifted = make_quadratic_sc();
    let cf = shifted.closed_forms.take().unwrap();
    let old_loss = cf.loss;
    shifted.closed_forms = Some(crate::bench::ClosedForms {
        loss: Box::new(move |x, y| old_loss(x, y) + offset),
        grad: cf.grad,
        naive_grad: cf.naive_grad,
        primal: None,
        y_star: None,
    });
    let x = DVector::from_element(1, 3.0);
    let a = moreau_grad(&base, &x, 12.0, PROX_TOL).unwrap();
    let b = moreau_grad(&shifted, &x, 12.0, PROX_TOL).unwrap();
    let gap = (a - b).abs();
    CheckResult::new(
        "metrics",
        "moreau_offset_invariance",
        gap <= 1e-6,
        format!("|moreau(Phi) - moreau(Phi + c)| = {gap:.2e}"),
    )
}

// --------------------------------------------------------------- bench --

fn closed_form_crosscheck() -> CheckResult {
    let problems = vec![
        make_quadratic_sc(),
        make_pl_sine(),
        make_election(4, 3, 17, 0.3).unwrap(),
        make_strategic_classification(8, 4, 17).unwrap(),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for p in &problems {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut worst_ratio = 0.0f64;
        for _ in 0..10 {
            let x = DVector::from_fn(p.n, |_, _| rng.random_range(-1.0..1.0));
            let y = match &p.y_set {
                ConstraintSet::Simplex { .. } => p
                    .y_set
                    .project(&DVector::from_fn(p.m, |_, _| rng.random_range(0.0..1.0)))
                    .unwrap(),
                _ => DVector::from_fn(p.m, |_, _| rng.random_range(-1.0..1.0)),
            };
            let m = 100_000usize;
            let batch = p.truth.sample(&x, &y, m, &mut rng).unwrap();
            let mut sum = 0.0;
            let mut sq = 0.0;
            for s in &batch {
                let v = (p.loss.eval)(&x, &y, s);
                sum += v;
                sq += v * v;
            }
            let mean = sum / m as f64;
            let var = (sq / m as f64 - mean * mean).max(0.0);
            let se = (var / m as f64).sqrt();
            let exact = p.exact_loss(&x, &y).unwrap();
            let ratio = (mean - exact).abs() / (5.0 * se.max(1e-12));
            worst_ratio = worst_ratio.max(ratio);
        }
        if worst_ratio > 1.0 {
            pass = false;
        }
        detail.push_str(&format!("[{}: worst |gap|/5se = {worst_ratio:.2}] ", p.name));
    }
    CheckResult::new("bench", "closed_form_crosscheck", pass, detail)
}

/// Finite-difference Hessian audit of the stated smoothness constants.
///
/// The quadratic benchmark is audited with the full joint Hessian. For the
/// sine benchmark the stated constant is the `y`-coordinate smoothness that
/// the stepsize rules consume (`|d2L/dy2| <= 32`, tight at the origin); its
/// full joint Hessian exceeds 32 slightly already at the origin.
fn smoothness_audit() -> CheckResult {
    let quad = make_quadratic_sc();
    let cf = quad.closed_forms.as_ref().unwrap();
    let h = 1e-5;
    let mut worst_quad = 0.0f64;
    for i in 0..21 {
        for j in 0..21 {
            let x = -8.0 + 16.0 * i as f64 / 20.0;
            let y = -8.0 + 16.0 * j as f64 / 20.0;
            let hess = fd_hessian_2d(|a, b| {
                let (gx, gy) = (cf.grad)(&DVector::from_element(1, a), &DVector::from_element(1, b));
                (gx[0], gy[0])
            }, x, y, h);
            let norm = hess
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(0.0f64, |acc, e| acc.max(e.abs()));
            worst_quad = worst_quad.max(norm);
        }
    }
    let quad_ok = worst_quad <= 12.0 + 1e-6;

    let sine = make_pl_sine();
    let scf = sine.closed_forms.as_ref().unwrap();
    let mut worst_sine = 0.0f64;
    for i in 0..121 {
        for j in 0..121 {
            let x = -3.0 + 6.0 * i as f64 / 120.0;
            let y = -3.0 + 6.0 * j as f64 / 120.0;
            let gy_p = (scf.grad)(&DVector::from_element(1, x), &DVector::from_element(1, y + h)).1[0];
            let gy_m = (scf.grad)(&DVector::from_element(1, x), &DVector::from_element(1, y - h)).1[0];
            worst_sine = worst_sine.max(((gy_p - gy_m) / (2.0 * h)).abs());
        }
    }
    let sine_ok = worst_sine <= 32.0 + 1e-6;
    CheckResult::new(
        "bench",
        "smoothness_audit",
        quad_ok && sine_ok,
        format!(
            "quadratic joint Hessian norm {worst_quad:.4} <= 12; sine y-smoothness {worst_sine:.4} <= 32"
        ),
    )
}

fn fd_hessian_2d<F>(grad: F, x: f64, y: f64, h: f64) -> DMatrix<f64>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    let (gx_xp, gy_xp) = grad(x + h, y);
    let (gx_xm, gy_xm) = grad(x - h, y);
    let (gx_yp, gy_yp) = grad(x, y + h);
    let (gx_ym, gy_ym) = grad(x, y - h);
    let hxx = (gx_xp - gx_xm) / (2.0 * h);
    let hxy = 0.5 * ((gx_yp - gx_ym) / (2.0 * h) + (gy_xp - gy_xm) / (2.0 * h));
    let hyy = (gy_yp - gy_ym) / (2.0 * h);
    DMatrix::from_row_slice(2, 2, &[hxx, hxy, hxy, hyy])
}

/// PL-inequality audit: min over the grid of
/// `|grad_y L|^2 / (2 (Phi(x) - L(x,y)))`, which must be at least `mu` for
/// the inequality to hold with that modulus.
pub fn pl_condition_audit(
    problem: &ProblemInstance,
    mu: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    grid: usize,
) -> Result<(bool, f64, (f64, f64))> {
    let cf = problem
        .closed_forms
        .as_ref()
        .expect("audit needs closed forms");
    let mut min_ratio = f64::INFINITY;
    let mut argmin = (0.0, 0.0);
    let mut holds = true;
    for i in 0..grid {
        let x = x_lo + (x_hi - x_lo) * i as f64 / (grid - 1) as f64;
        let xv = DVector::from_element(1, x);
        let phi = inner_max(problem, &xv, INNER_TOL)?.value;
        for j in 0..grid {
            let y = y_lo + (y_hi - y_lo) * j as f64 / (grid - 1) as f64;
            let yv = DVector::from_element(1, y);
            let gy = (cf.grad)(&xv, &yv).1.norm_squared();
            let gap = phi - (cf.loss)(&xv, &yv);
            if gap <= 1e-9 {
                continue;
            }
            let ratio = gy / (2.0 * gap);
            if ratio < min_ratio {
                min_ratio = ratio;
                argmin = (x, y);
            }
            if gy + 1e-12 < 2.0 * mu * gap {
                holds = false;
            }
        }
    }
    Ok((holds, min_ratio, argmin))
}

fn pl_audit_quadratic() -> CheckResult {
    // Strong concavity with modulus 3 implies the PL inequality with the
    // same modulus; the audit must confirm it on the grid.
    let p = make_quadratic_sc();
    let (holds, min_ratio, at) = pl_condition_audit(&p, 3.0, -3.0, 3.0, -3.0, 3.0, 101).unwrap();
    CheckResult::new(
        "bench",
        "pl_audit_quadratic",
        holds,
        format!("min ratio {min_ratio:.3} at ({:.2}, {:.2}), needs >= 3", at.0, at.1),
    )
}

/// The sine benchmark's nominal modulus 8 does not survive a grid audit:
/// the inner problem has non-global critical points inside the region, so
/// the measured ratio collapses there. This check pins that finding (it
/// fails if the audit unexpectedly starts passing).
fn pl_audit_sine_nominal_modulus() -> CheckResult {
    let p = make_pl_sine();
    let (holds, min_ratio, at) = pl_condition_audit(&p, 8.0, -3.0, 3.0, -3.0, 3.0, 101).unwrap();
    CheckResult::new(
        "bench",
        "pl_audit_sine_nominal_modulus",
        !holds,
        format!(
            "nominal modulus 8 violated as documented: min ratio {min_ratio:.3e} at ({:.2}, {:.2})",
            at.0, at.1
        ),
    )
}
