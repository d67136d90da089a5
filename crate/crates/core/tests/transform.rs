mod common;

use common::{auto_transform, linear, rough, transform_at};
use zvonkin::density::uniform_grid;
use zvonkin::model::{box_grid, check_assumptions};
use zvonkin::resolvent::solve_resolvent_fd;
use zvonkin::transform::{
    build_transform, coefficient_smoothness, image_grid, verify_diffeo, verify_ellipticity, ROUNDTRIP_TOL,
};
use zvonkin::Error;

fn valid_grid(t: &zvonkin::ZvonkinTransform64, n: usize) -> Vec<Vec<f64>> {
    let r = t.valid_radius() - 0.05;
    uniform_grid(-r, r, n).into_iter().map(|v| vec![v]).collect()
}

#[test]
fn rough_testbed_passes_the_assumption_audit() {
    let p = rough();
    let grid = box_grid(1, -8.0, 8.0, 0.05);
    let rep = check_assumptions(&p, &grid, 1e-3).unwrap();
    assert!(rep.pass.all(), "{rep:?}");
    assert!((rep.holder_drift.seminorm_estimate - 1.0).abs() < 1e-6);
}

#[test]
fn rough_transform_is_a_diffeomorphism() {
    let t = auto_transform(&rough());
    let rep = verify_diffeo(&t, &valid_grid(&t, 1000), 1e-4).unwrap();
    assert!(rep.roundtrip_max < ROUNDTRIP_TOL, "{rep:?}");
    assert!(rep.min_det_dphi >= 1.0 - t.c_lambda() - 1e-3);
    assert!(rep.min_det_dphi > 0.0);
    assert!(rep.accepted);
}

#[test]
fn rough_transform_is_uniformly_elliptic() {
    let t = auto_transform(&rough());
    let y = image_grid(&t, &valid_grid(&t, 1000)).unwrap();
    let rep = verify_ellipticity(&t, &y).unwrap();
    // inf σ² = 0.7² and |Dφ| ≥ 1 − c(λ).
    let need = (1.0 - t.c_lambda()).powi(2) * 0.49 - 1e-3;
    assert!(rep.c_min >= need, "{} < {need}", rep.c_min);
    assert!(rep.c_max.is_finite());
    let sm = coefficient_smoothness(&t, &y).unwrap();
    assert!(sm.finite);
}

#[test]
fn linear_transform_closed_forms() {
    // ψ = βx/(λ − β): φ(x) = λx/(λ − β), b̃(y) = βy, σ̃ = sλ/(λ − β).
    let p = linear(1.0, 1.0, 0.0);
    let t = transform_at(&p, 10.0);
    for x in [-3.0, 0.0, 2.5] {
        assert!((t.phi(&[x]).unwrap()[0] - 10.0 * x / 9.0).abs() < 1e-6);
        let y = 10.0 * x / 9.0;
        assert!((t.btilde(&[y]).unwrap()[0] - y).abs() < 1e-5);
        assert!((t.sigmatilde(&[y]).unwrap()[0] - 10.0 / 9.0).abs() < 1e-5);
        assert!((t.dphi_inverse(&[y]).unwrap()[0] - 0.9).abs() < 1e-5);
    }
}

#[test]
fn zero_drift_gives_the_identity() {
    let p = common::problem(
        0.3,
        zvonkin::model::DriftSpec::Zero,
        zvonkin::model::DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
    );
    let t = transform_at(&p, 10.0);
    assert_eq!(t.c_lambda(), 0.0);
    assert_eq!(t.invert_phi(&[1.234]).unwrap()[0], 1.234);
}

#[test]
fn lambda_below_the_drift_rate_is_refused() {
    let p = linear(1.0, 1.0, 0.0);
    let sol = solve_resolvent_fd(&p, 0.5, 10.0, 0.01);
    match sol {
        Ok(s) => assert!(matches!(build_transform(s, &p), Err(Error::LambdaTooSmall { .. }))),
        Err(e) => assert!(
            matches!(e, Error::SolverStalled { .. } | Error::LambdaTooSmall { .. }),
            "{e:?}"
        ),
    }
}

#[test]
fn points_outside_the_valid_box_are_rejected() {
    let t = auto_transform(&rough());
    assert!(matches!(t.invert_phi(&[50.0]), Err(Error::OutOfDomain { .. })));
}
