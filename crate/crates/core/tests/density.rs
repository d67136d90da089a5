mod common;

use common::{auto_transform, linear, max_of, rough, transform_at};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use zvonkin::density::*;
use zvonkin::flowsim::{
    euler_terminal, nondegeneracy_scan, simulate_equivalent_pair, BrownianGrid, Family, FunctionalSpec, Storage,
};
use zvonkin::{Error, Result};

fn normals(seed: u64, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

#[test]
fn kde_of_standard_normal_draws() {
    let s = normals(1, 100_000, 0.0, 1.0);
    let grid = uniform_grid(-6.0, 6.0, 601);
    let e = kde(&s, &grid, None).unwrap();
    assert!(e.sup_error(|x| gaussian_pdf(x, 0.0, 1.0)) < 0.02);
    assert!(e.mass > 0.95 && e.mass <= 1.0 + 1e-3);
    assert!(e.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn kde_of_ou_terminal_values() {
    let p = linear(-1.0, 1.0, 1.0);
    let xs: Vec<f64> = (0..20_000)
        .map(|i| {
            let bg = BrownianGrid::generate(2, i, 1000, 1e-3, 1);
            euler_terminal(&p, &[1.0], &[1.0], &bg).unwrap().unwrap()[0]
        })
        .collect();
    let grid = uniform_grid(-3.0, 4.0, 351);
    let e = kde(&xs, &grid, None).unwrap();
    let (m, v) = ((-1.0f64).exp(), (1.0 - (-2.0f64).exp()) / 2.0);
    assert!(e.sup_error(|x| gaussian_pdf(x, m, v)) < 0.03);
}

#[test]
fn ks_null_passes_at_least_nine_times_in_ten() {
    let passes = (0..40)
        .filter(|&s| {
            ks_distance(&normals(100 + s, 10_000, 0.0, 1.0), &normals(200 + s, 10_000, 0.0, 1.0))
                .unwrap()
                .pass
        })
        .count();
    assert!(passes >= 36, "{passes}/40");
}

#[test]
fn ks_detects_a_half_unit_shift() {
    let r = ks_distance(&normals(3, 10_000, 0.0, 1.0), &normals(4, 10_000, 0.5, 1.0)).unwrap();
    assert!(!r.pass, "{r:?}");
}

#[test]
fn linear_change_of_variables_is_exact_on_gaussians() {
    // φ(x) = ax with a = λ/(λ − β): ρ_X(u) = a ρ_Y(au) for Y = aX.
    let p = linear(1.0, 1.0, 0.0);
    let t = transform_at(&p, 10.0);
    let a = 10.0 / 9.0;
    let gx = uniform_grid(-6.0, 6.0, 1201);
    let gy = uniform_grid(-7.0, 7.0, 1401);
    let rho_x = DensityEstimate {
        values: gx.iter().map(|&u| gaussian_pdf(u, 0.0, 1.0)).collect(),
        grid: gx.clone(),
        bandwidth: 0.0,
        n_samples: 0,
        mass: 1.0,
    };
    let rho_y = DensityEstimate {
        values: gy.iter().map(|&u| gaussian_pdf(u, 0.0, a * a)).collect(),
        grid: gy,
        bandwidth: 0.0,
        n_samples: 0,
        mass: 1.0,
    };
    let r = change_of_variables_check(&rho_x, &rho_y, &t, &gx).unwrap();
    assert!(r.l1_discrepancy < 1e-4, "{r:?}");
    let outside = uniform_grid(-9.5, 0.0, 10);
    assert!(matches!(
        change_of_variables_check(&rho_x, &rho_y, &t, &outside),
        Err(Error::OutOfDomain { .. })
    ));
}

#[test]
fn rough_change_of_variables_with_identity_control() {
    let p = rough();
    let t = auto_transform(&p);
    let ens = simulate_equivalent_pair(&p, &t, 20_000, 2e-3, 3, Storage::Terminal).unwrap();
    let xd = ens.terminal_samples(Family::XDirect, 0);
    let xm = ens.terminal_samples(Family::XMapped, 0);
    let y = ens.terminal_samples(Family::Y, 0);
    let gx = uniform_grid(-4.0, 7.0, 1101);
    let rx = kde(&xd, &gx, None).unwrap();
    let rm = kde(&xm, &gx, None).unwrap();
    let ry = kde(&y, &uniform_grid(-4.5, 7.5, 1201), None).unwrap();
    let r = change_of_variables_check(&rx, &ry, &t, &gx).unwrap();
    assert!(r.l1_discrepancy < 0.05, "{r:?}");
    assert!(l1_distance(&rx, &rm, &gx) < 0.02);
}

#[test]
fn nourdin_viens_on_brownian_motion() {
    let z = uniform_grid(-5.0, 5.0, 201);
    let f = BrownianTerminal { n_steps: 100, dt: 0.01 };
    let nv = nourdin_viens_density(&f, 100_000, 8, &z, 5).unwrap();
    assert!((nv.abs_mean - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
    let peak = gaussian_pdf(0.0, 0.0, 1.0);
    let sup = max_of(
        nv.density_grid()
            .iter()
            .zip(&nv.density_values)
            .map(|(&x, &d)| (d - gaussian_pdf(x, 0.0, 1.0)).abs()),
    );
    assert!(sup < 0.05 * peak, "{sup}");
    for (&zz, &g) in nv.z_grid.iter().zip(&nv.g_values) {
        if zz.abs() <= 2.0 {
            assert!((g - 1.0).abs() < 0.1, "g({zz}) = {g}");
        }
    }
}

/// `F = √v · B_1`, whose pairing is `v` on every path.
struct ScaledBrownian(f64);

impl WienerFunctional<f64> for ScaledBrownian {
    fn n_steps(&self) -> usize {
        50
    }
    fn dt(&self) -> f64 {
        0.02
    }
    fn evaluate(&self, bg: &BrownianGrid<f64>) -> Result<Option<(f64, Vec<f64>)>> {
        let s = self.0.sqrt();
        Ok(Some((s * bg.terminal()[0], vec![s; 51])))
    }
}

#[test]
fn nourdin_viens_on_a_scaled_gaussian() {
    let v = 2.5;
    let z = uniform_grid(-7.0, 7.0, 281);
    let nv = nourdin_viens_density(&ScaledBrownian(v), 50_000, 4, &z, 6).unwrap();
    let near = nv.z_grid.iter().zip(&nv.g_values).filter(|(z, _)| z.abs() < 3.0);
    assert!(near.clone().count() > 0);
    for (_, &g) in near {
        assert!((g - v).abs() < 1e-9);
    }
    let peak = gaussian_pdf(0.0, 0.0, v);
    let sup = max_of(
        nv.density_grid()
            .iter()
            .zip(&nv.density_values)
            .map(|(&x, &d)| (d - gaussian_pdf(x, 0.0, v)).abs()),
    );
    assert!(sup < 0.05 * peak);
}

#[test]
fn nourdin_viens_on_the_ou_terminal_value() {
    let p = linear(-1.0, 1.0, 1.0);
    let t = transform_at(&p, 10.0);
    let f = TransformedTerminal {
        transform: &t,
        n_steps: 100,
        dt: 0.01,
    };
    let z = uniform_grid(-3.5, 3.5, 141);
    let nv = nourdin_viens_density(&f, 10_000, 8, &z, 7).unwrap();
    assert_eq!(nv.n_escaped, 0);
    let (m, v) = ((-1.0f64).exp(), (1.0 - (-2.0f64).exp()) / 2.0);
    let sup = max_of(
        nv.density_grid()
            .iter()
            .zip(&nv.density_values)
            .map(|(&x, &d)| (d - gaussian_pdf(x, m, v)).abs()),
    );
    assert!(sup < 0.05 * gaussian_pdf(m, m, v), "{sup}");
}

/// Claims a vanishing derivative, so the pairing is identically zero.
struct ZeroPairing;

impl WienerFunctional<f64> for ZeroPairing {
    fn n_steps(&self) -> usize {
        10
    }
    fn dt(&self) -> f64 {
        0.1
    }
    fn evaluate(&self, bg: &BrownianGrid<f64>) -> Result<Option<(f64, Vec<f64>)>> {
        Ok(Some((bg.terminal()[0], vec![0.0; 11])))
    }
}

#[test]
fn nonpositive_conditional_variance_is_an_error() {
    let z = uniform_grid(-2.0, 2.0, 41);
    let r = nourdin_viens_density(&ZeroPairing, 5000, 1, &z, 8);
    assert!(matches!(r, Err(Error::DegenerateConditionalVariance { .. })), "{r:?}");
}

#[test]
fn functional_densities() {
    let p = rough();
    let t = auto_transform(&p);
    let ens = simulate_equivalent_pair(&p, &t, 5000, 2e-3, 9, Storage::Terminal).unwrap();
    let xs = ens.terminal_samples(Family::XMapped, 0);
    let sine = FunctionalSpec::SinePerturbed { amp: 0.5 }.build().unwrap();
    let id = FunctionalSpec::Identity.build().unwrap();
    let cert = nondegeneracy_scan(&t, Some(&sine), 200, 5e-3, 9).unwrap();
    let grid = uniform_grid(-5.0, 8.0, 521);
    let fid = density_of_g(&id, &xs, 1.0, Some(&grid), &cert).unwrap();
    assert_eq!(fid.estimate, kde(&xs, &grid, None).unwrap());
    let fs = density_of_g(&sine, &xs, 1.0, None, &cert).unwrap();
    assert!(fs.estimate.mass > 0.95);
    assert!(fs.certificate.min_dg_norm2.unwrap() > 0.0);

    // G = 2x of a Gaussian sample is Gaussian with four times the variance.
    let g = normals(10, 50_000, 0.0, 1.0);
    let two = FunctionalSpec::Scaled { factor: 2.0 }.build().unwrap();
    let e = density_of_g(&two, &g, 1.0, Some(&uniform_grid(-10.0, 10.0, 401)), &cert).unwrap();
    assert!(e.estimate.sup_error(|x| gaussian_pdf(x, 0.0, 4.0)) < 0.01);

    let mut bad = cert.clone();
    bad.degenerate_dg = 1;
    assert!(density_of_g(&id, &xs, 1.0, None, &bad).is_err());
}

#[test]
fn silverman_rule() {
    let s: Vec<f64> = {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect()
    };
    let m = zvonkin::flowsim::moments(&s);
    let h = silverman_bandwidth(&s).unwrap();
    assert!((h - 1.06 * m.variance.sqrt() * 1000f64.powf(-0.2)).abs() < 1e-15);
}
