//! The primal-dual baseline settles where its own residual vanishes, which
//! is not a stationary point of the primal function once the distribution
//! shifts with the decisions.

use nalgebra::DVector;
use smdd_core::bench::make_election;
use smdd_core::metrics::{primal_grad, spd_residual, INNER_TOL};
use smdd_core::solvers::{spd_run, Algo, RunConfig, Schedule};
use smdd_core::DecisionPair;

#[test]
fn spd_fixed_point_is_not_primal_stationary() {
    let p = make_election(10, 10, 1, 0.1).unwrap();
    // The baseline's fixed point solves the naive first-order conditions,
    // which decouple: x* = y* = (0.01 d / (1 + 0.01 d)) * 1.
    let scale = 0.1 / 1.1;
    let star = DVector::from_element(10, scale);
    let resid = spd_residual(&p, &star, &star, None).unwrap();
    let grad = primal_grad(&p, &star, INNER_TOL).unwrap().norm();
    println!("residual at fixed point: {resid:.3e}, |grad Phi|: {grad:.3e}");
    assert!(resid <= 1e-12);
    assert!(grad > 1e-3, "primal gradient should stay bounded away: {grad:.3e}");

    // A constant-stepsize baseline run drives its residual toward zero
    // while the primal gradient metric stays pinned near the same level.
    let cfg = RunConfig::new(
        Algo::Spd,
        4000,
        100,
        Schedule::Fixed { eta_x: 0.05, eta_y: 0.05 },
        3,
        DecisionPair::new(DVector::zeros(10), DVector::zeros(10)).unwrap(),
    );
    let trace = spd_run(&p, &p.truth, &cfg).unwrap();
    let first = &trace.records[0];
    let last = trace.records.last().unwrap();
    let resid_first = spd_residual(&p, &first.x, &first.y, None).unwrap();
    let resid_last = spd_residual(&p, &last.x, &last.y, None).unwrap();
    let grad_last = last.grad_metric.unwrap();
    println!("run: residual {resid_first:.3e} -> {resid_last:.3e}, final |grad Phi| {grad_last:.3e}");
    assert!(resid_last <= 0.2 * resid_first, "residual did not shrink");
    assert!(grad_last >= 5.0 * resid_last, "primal gradient should dominate the settled residual");
}
