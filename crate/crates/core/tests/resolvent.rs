mod common;

use common::{linear, rough};
use zvonkin::model::{DiffusionSpec, DriftSpec};
use zvonkin::resolvent::{
    auto_lambda, lambda_sweep, solve_resolvent_fd, solve_resolvent_mc, BoundaryRule, ResolventConfig,
};
use zvonkin::{Error, SdeProblem32};

#[test]
fn linear_drift_matches_x_over_lambda_minus_beta() {
    // λψ − ½ψ'' − xψ' = x is solved by ψ = x/(λ − 1).
    let p = linear(1.0, 1.0, 0.0);
    let s = solve_resolvent_fd(&p, 10.0, 10.0, 0.01).unwrap();
    let mut x = [0.0];
    let mut err: f64 = 0.0;
    for n in 0..s.psi.node_count() {
        s.psi.node_coords(n, &mut x);
        if x[0].abs() <= s.inner_radius() {
            err = err.max((s.psi.node_values(n)[0] - x[0] / 9.0).abs());
        }
    }
    assert!(err < 1e-3, "sup error {err}");
    assert!(s.residual_sup < 1e-3);
    assert!(s.residual_ok());
}

#[test]
fn c_lambda_follows_beta_over_lambda_minus_beta() {
    let p = linear(1.0, 1.0, 0.0);
    let sweep = lambda_sweep(&p, &[5.0, 10.0, 20.0, 40.0], 10.0, 0.01).unwrap();
    for (row, want) in sweep.rows.iter().zip([0.25, 1.0 / 9.0, 1.0 / 19.0, 1.0 / 39.0]) {
        assert!(
            (row.c_lambda - want).abs() < 0.02 * want,
            "λ={} c={}",
            row.lambda,
            row.c_lambda
        );
    }
    assert!(sweep.strictly_decreasing);
}

#[test]
fn rough_drift_c_lambda_strictly_decreases() {
    let sweep = lambda_sweep(&rough(), &[10.0, 20.0, 40.0, 80.0], 10.0, 0.01).unwrap();
    assert!(sweep.strictly_decreasing, "{:?}", sweep.rows);
    assert!(sweep.rows.iter().all(|r| r.residual_sup < 1e-3));
}

#[test]
fn grid_solution_agrees_with_feynman_kac_on_rough_drift() {
    let p = rough();
    let s = solve_resolvent_fd(&p, 10.0, 10.0, 0.01).unwrap();
    for x in [0.0, 1.5] {
        let mut v = [0.0];
        s.psi.eval(&[x], &mut v).unwrap();
        let mc = solve_resolvent_mc(&p, 10.0, &[x], 4000, 1.5, 1e-3, 17).unwrap();
        // Euler bias at dt = 1e-3 is far below the statistical error here.
        assert!(
            (v[0] - mc.mean[0]).abs() < 4.0 * mc.std_error[0] + 2e-3,
            "x={x} grid={} mc={}±{}",
            v[0],
            mc.mean[0],
            mc.std_error[0]
        );
    }
}

#[test]
fn auto_policy_picks_the_first_adequate_lambda() {
    let s = auto_lambda(&rough(), 10.0, 0.01).unwrap();
    assert_eq!(s.lambda, 10.0);
    assert!(s.c_lambda < 0.5);
}

#[test]
fn drift_over_lambda_boundary_leaves_a_boundary_layer() {
    let p = linear(1.0, 1.0, 0.0);
    let mut cfg = ResolventConfig::new(10.0, 10.0, 0.01);
    cfg.boundary = BoundaryRule::DriftOverLambda;
    let s = zvonkin::resolvent::solve_resolvent_fd_with(&p, &cfg).unwrap();
    let mut v = [0.0];
    s.psi.eval(&[8.0], &mut v).unwrap();
    assert!((v[0] - 8.0 / 9.0).abs() > 1e-3);
    s.psi.eval(&[0.5], &mut v).unwrap();
    assert!((v[0] - 0.5 / 9.0).abs() < 1e-6);
}

#[test]
fn single_precision_solve() {
    let spec = zvonkin::model::ProblemSpec {
        dim: 1,
        x0: vec![0.0],
        horizon: 1.0,
        theta: 0.5,
        drift: DriftSpec::Linear { beta: 1.0 },
        diffusion: DiffusionSpec::Constant { value: 1.0 },
    };
    let p: SdeProblem32 = spec.build().unwrap();
    let mut cfg = ResolventConfig::new(10.0, 10.0, 0.05);
    cfg.tolerance = 1e-6;
    let s = zvonkin::resolvent::solve_resolvent_fd_with(&p, &cfg).unwrap();
    let mut v = [0.0f32];
    s.psi.eval(&[3.0], &mut v).unwrap();
    assert!((v[0] - 3.0 / 9.0).abs() < 1e-3);
}

#[test]
fn sweep_rejects_unordered_lambdas() {
    let p = linear(1.0, 1.0, 0.0);
    assert!(matches!(
        lambda_sweep(&p, &[10.0, 5.0], 10.0, 0.1),
        Err(Error::InvalidInput(_))
    ));
}
