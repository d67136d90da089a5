use proptest::prelude::*;
use zvonkin::density::{ks_distance, trapezoid, uniform_grid};
use zvonkin::flowsim::{jacobian_closed_form_from, BrownianGrid};
use zvonkin::linalg;
use zvonkin::resolvent::GridFunction;
use zvonkin::transform::{CoefficientJacobians, MAX_DIM};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ks_is_symmetric_and_bounded(a in prop::collection::vec(-5.0f64..5.0, 1..60), b in prop::collection::vec(-5.0f64..5.0, 1..60)) {
        let ab = ks_distance(&a, &b).unwrap();
        let ba = ks_distance(&b, &a).unwrap();
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
    }

    #[test]
    fn coarsening_preserves_partial_sums(seed in any::<u64>(), f in 1usize..8) {
        let g = BrownianGrid::<f64>::generate(seed, 0, 8 * f * 5, 1e-3, 1);
        let c = g.coarsen(f).unwrap();
        let mut fine_sum = 0.0;
        let mut coarse_sum = 0.0;
        for i in 0..c.n_steps() {
            coarse_sum += c.increment(i)[0];
            for j in 0..f {
                fine_sum += g.increment(i * f + j)[0];
            }
            prop_assert!((fine_sum - coarse_sum).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes(vals in prop::collection::vec(-3.0f64..3.0, 21)) {
        let mut g = GridFunction::<f64>::zeros(1, 1.0, 0.1, 1).unwrap();
        g.values_mut().copy_from_slice(&vals);
        let mut x = [0.0];
        let mut out = [0.0];
        for (n, &v) in vals.iter().enumerate() {
            g.node_coords(n, &mut x);
            g.eval(&x, &mut out).unwrap();
            prop_assert_eq!(out[0], v);
        }
    }

    #[test]
    fn closed_form_jacobian_times_inverse_is_one(db in -3.0f64..3.0, ds in -2.0f64..2.0, seed in any::<u64>()) {
        let mut cj = CoefficientJacobians { db: [0.0; MAX_DIM * MAX_DIM], dsigma: [0.0; MAX_DIM * MAX_DIM * MAX_DIM] };
        cj.db[0] = db;
        cj.dsigma[0] = ds;
        let bg = BrownianGrid::<f64>::generate(seed, 0, 200, 5e-3, 1);
        let (j, ji) = jacobian_closed_form_from(&vec![cj; 201], &bg);
        for (a, b) in j.iter().zip(&ji) {
            prop_assert!((a * b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_well_conditioned_two_by_two(a in 1.0f64..3.0, b in -0.5f64..0.5, c in -0.5f64..0.5, d in 1.0f64..3.0) {
        let m = [a, b, c, d];
        let inv = linalg::inverse(&m, 2).unwrap();
        let mut p = [0.0; 4];
        linalg::matmul(&m, &inv, 2, 2, 2, &mut p);
        for (x, e) in p.iter().zip(linalg::identity::<f64>(2)) {
            prop_assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn trapezoid_is_exact_for_affine_functions(s in -2.0f64..2.0, c in -2.0f64..2.0, n in 2usize..50) {
        let g = uniform_grid(-1.0, 2.0, n);
        let v: Vec<f64> = g.iter().map(|x| s * x + c).collect();
        prop_assert!((trapezoid(&g, &v) - (1.5 * s + 3.0 * c)).abs() < 1e-12);
    }
}
