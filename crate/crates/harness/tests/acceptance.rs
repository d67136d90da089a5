//! Full-scale acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use zvonkin::density::{self, BrownianTerminal};
use zvonkin::flowsim::{self, BrownianGrid, FdRoute, FunctionalSpec, Storage};
use zvonkin::model::{DiffusionSpec, DriftSpec, ProblemSpec};
use zvonkin::resolvent::{auto_lambda, lambda_sweep, solve_resolvent_fd};
use zvonkin::transform::{build_transform, image_grid, verify_diffeo, verify_ellipticity};
use zvonkin::{SdeProblem64, ZvonkinTransform64};
use zvonkin_harness::pipeline::{self, audit_grid, Command};
use zvonkin_harness::preset;

const RADIUS: f64 = 10.0;
const SPACING: f64 = 0.01;

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn problem(x0: f64, drift: DriftSpec, diffusion: DiffusionSpec) -> SdeProblem64 {
    ProblemSpec {
        dim: 1,
        x0: vec![x0],
        horizon: 1.0,
        theta: 0.5,
        drift,
        diffusion,
    }
    .build()
    .expect("valid problem")
}

fn linear(beta: f64, x0: f64) -> SdeProblem64 {
    problem(x0, DriftSpec::Linear { beta }, DiffusionSpec::Constant { value: 1.0 })
}

fn rough() -> SdeProblem64 {
    problem(
        0.0,
        DriftSpec::SqrtAbs { scale: 1.0 },
        DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
    )
}

fn rough_transform() -> ZvonkinTransform64 {
    let p = rough();
    build_transform(auto_lambda(&p, RADIUS, SPACING).expect("auto λ"), &p).expect("transform")
}

fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn resolvent_linear_oracle() -> Outcome {
    let start = Instant::now();
    let sol = solve_resolvent_fd(&linear(1.0, 0.0), 10.0, RADIUS, SPACING).expect("solve");
    let secs = start.elapsed().as_secs_f64();
    let mut x = [0.0];
    let err = max_of((0..sol.psi.node_count()).filter_map(|n| {
        sol.psi.node_coords(n, &mut x);
        (x[0].abs() <= sol.inner_radius()).then(|| (sol.psi.node_values(n)[0] - x[0] / 9.0).abs())
    }));
    let pass = err < 1e-3 && sol.residual_sup < 1e-3 && secs < 5.0;
    (
        pass,
        format!(
            "sup|psi - x/9| = {err:.3e}, residual = {:.3e}, {secs:.2} s",
            sol.residual_sup
        ),
    )
}

fn c_lambda_decay() -> Outcome {
    let lin = lambda_sweep(&linear(1.0, 0.0), &[5.0, 10.0, 20.0, 40.0], RADIUS, SPACING).expect("linear sweep");
    let rel = max_of(
        lin.rows
            .iter()
            .map(|r| (r.c_lambda - 1.0 / (r.lambda - 1.0)).abs() * (r.lambda - 1.0)),
    );
    let rough = lambda_sweep(&rough(), &[10.0, 20.0, 40.0, 80.0], RADIUS, SPACING).expect("rough sweep");
    let cs: Vec<String> = rough.rows.iter().map(|r| format!("{:.4}", r.c_lambda)).collect();
    (
        rel < 0.02 && rough.strictly_decreasing,
        format!("linear max relative error {rel:.2e}; rough c = [{}]", cs.join(", ")),
    )
}

fn diffeomorphism() -> Outcome {
    let t = rough_transform();
    let r = verify_diffeo(&t, &audit_grid(&t), t.fd_step()).expect("diffeo audit");
    let bound = 1.0 - t.c_lambda() - 1e-3;
    let pass = r.n_points == 1000 && r.roundtrip_max < 1e-10 && r.min_det_dphi >= bound && bound > 0.0;
    (
        pass,
        format!(
            "round trip {:.2e}, min det {:.4} >= {bound:.4}, {} points",
            r.roundtrip_max, r.min_det_dphi, r.n_points
        ),
    )
}

fn ellipticity() -> Outcome {
    let t = rough_transform();
    let e = verify_ellipticity(&t, &image_grid(&t, &audit_grid(&t)).expect("image grid")).expect("ellipticity");
    let bound = (1.0 - t.c_lambda()).powi(2) * 0.49 - 1e-3;
    (
        e.c_min >= bound && e.c_max.is_finite(),
        format!("c_min {:.4} >= {bound:.4}, c_max {:.4}", e.c_min, e.c_max),
    )
}

fn law_equivalence() -> Outcome {
    let p = rough();
    let t = rough_transform();
    let mut passes = 0;
    let mut stats = Vec::new();
    for seed in [11, 22, 33, 44, 55] {
        let ens = flowsim::simulate_equivalent_pair(&p, &t, 10_000, 1e-3, seed, Storage::Terminal).expect("ensemble");
        let ks = ens.summary().expect("summary").components[0].ks_direct_vs_mapped;
        passes += usize::from(ks.pass);
        stats.push(format!("{:.4}", ks.statistic));
    }
    (
        passes >= 4,
        format!("{passes}/5 seeds below 0.0192, KS = [{}]", stats.join(", ")),
    )
}

/// Mean over paths of `sup_i |JY_closed − JY_var| / |JY_closed|`, and the
/// closed-form inverse defect.
fn jacobian_gap(t: &ZvonkinTransform64, dt: f64, n_paths: u64) -> (f64, f64) {
    let n = flowsim::step_count(1.0, dt);
    let y0 = t.phi(&[0.0]).unwrap();
    let (mut sum, mut inv) = (0.0, 0.0_f64);
    for i in 0..n_paths {
        let bg = BrownianGrid::generate(5, i, n, dt, 1);
        let y = flowsim::euler_maruyama(t, &y0, &[0.0], &bg).unwrap();
        let (_, derivs) = flowsim::coefficient_jacobian_path(t, &y).unwrap();
        let jv = flowsim::jacobian_variational_from(&derivs, &bg, 1);
        let (jc, jci) = flowsim::jacobian_closed_form_from(&derivs, &bg);
        sum += max_of((0..jc.len()).map(|k| (jc[k] - jv.at(k)[0]).abs() / jc[k].abs()));
        inv = inv.max(max_of(jc.iter().zip(&jci).map(|(a, b)| (a * b - 1.0).abs())));
    }
    (sum / n_paths as f64, inv)
}

fn jacobian_cross_route() -> Outcome {
    let t = rough_transform();
    let (coarse, inv_c) = jacobian_gap(&t, 1e-4, 20);
    let (fine, inv_f) = jacobian_gap(&t, 5e-5, 20);
    let inv = inv_c.max(inv_f);
    (
        coarse <= 0.05 && fine < coarse && inv <= 1e-6,
        format!("gap {coarse:.2e} at dt 1e-4, {fine:.2e} at dt 5e-5, inverse defect {inv:.1e}"),
    )
}

fn malliavin_derivative() -> Outcome {
    let ou = linear(-1.0, 1.0);
    let tou = build_transform(auto_lambda(&ou, RADIUS, SPACING).unwrap(), &ou).unwrap();
    let bg = BrownianGrid::generate(9, 0, 1000, 1e-3, 1);
    let y = flowsim::euler_maruyama(&tou, &tou.phi(&[1.0]).unwrap(), &[1.0], &bg).unwrap();
    let flow = flowsim::flow_derivatives(&tou, &y, &bg).unwrap();
    let oracle = max_of((0..=1000).step_by(50).flat_map(|ti| {
        let flow = &flow;
        (0..=ti).map(move |r| {
            let exact = (-((ti - r) as f64) * 1e-3).exp();
            (flow.dx.get(ti, r)[0] - exact).abs() / exact
        })
    }));
    let p = rough();
    let t = rough_transform();
    let (mut cm_ou, mut cm_rough) = (0.0_f64, 0.0_f64);
    for i in 0..3 {
        let bg = BrownianGrid::generate(9, i, 1000, 1e-3, 1);
        cm_ou = cm_ou.max(
            flowsim::malliavin_fd_check(&ou, &tou, &bg, 0.2, 0.6, 1e-4, 0, FdRoute::Direct)
                .unwrap()
                .relative_error,
        );
        cm_rough = cm_rough.max(
            flowsim::malliavin_fd_check(&p, &t, &bg, 0.2, 0.6, 1e-4, 0, FdRoute::Transformed)
                .unwrap()
                .relative_error,
        );
    }
    (
        oracle < 1e-2 && cm_ou < 1e-2 && cm_rough < 5e-2,
        format!("OU oracle {oracle:.2e}, CM OU {cm_ou:.2e}, CM rough {cm_rough:.2e}"),
    )
}

fn nondegeneracy() -> Outcome {
    let t = rough_transform();
    let g = FunctionalSpec::SinePerturbed { amp: 0.5 }.build::<f64>().unwrap();
    let s = flowsim::nondegeneracy_scan(&t, Some(&g), 10_000, 1e-3, 8).expect("scan");
    let min_dg = s.min_dg_norm2.unwrap_or(f64::NAN);
    let pass = s.evaluated > 0 && s.min_dx_norm2 > 0.0 && min_dg > 0.0 && s.degenerate_dx == 0 && s.degenerate_dg == 0;
    (
        pass,
        format!(
            "min |DX|^2 {:.4}, min |DG|^2 {min_dg:.4}, {} evaluated, {} degenerate",
            s.min_dx_norm2,
            s.evaluated,
            s.degenerate_dx + s.degenerate_dg
        ),
    )
}

fn change_of_variables() -> Outcome {
    let p = rough();
    let t = rough_transform();
    let ens = flowsim::simulate_equivalent_pair(&p, &t, 100_000, 1e-3, 2, Storage::Terminal).expect("ensemble");
    let dc = pipeline::compare_densities(&t, &ens, 1001, None, None).expect("densities");
    let l1 = dc.change_of_variables.l1_discrepancy;
    (
        l1 < 0.05 && dc.identity_control < 0.02,
        format!("L1 {l1:.4}, identity control {:.4}", dc.identity_control),
    )
}

fn nourdin_viens() -> Outcome {
    let z = density::uniform_grid(-5.0, 5.0, 201);
    let f = BrownianTerminal { n_steps: 100, dt: 0.01 };
    let est = density::nourdin_viens_density(&f, 100_000, 8, &z, 3).expect("reconstruction");
    let peak = density::gaussian_pdf(0.0, 0.0, 1.0);
    let sup = max_of(
        est.z_grid
            .iter()
            .zip(&est.density_values)
            .map(|(z, d)| (d - density::gaussian_pdf(z + est.mean_shift, 0.0, 1.0)).abs()),
    );
    let g_err = max_of(
        est.z_grid
            .iter()
            .zip(&est.g_values)
            .filter(|(z, _)| z.abs() <= 2.0)
            .map(|(_, g)| (g - 1.0).abs()),
    );
    (
        sup <= 0.05 * peak && g_err <= 0.1,
        format!(
            "sup error {sup:.4} <= {:.4}, max |g - 1| on |z| <= 2: {g_err:.4}",
            0.05 * peak
        ),
    )
}

fn reproducibility() -> Outcome {
    let run = || {
        let dir = tempfile::tempdir().expect("tempdir");
        let mut cfg = preset("rough").unwrap();
        cfg.output = Some(dir.path().to_path_buf());
        pipeline::execute(Command::Simulate, &cfg).expect("simulate");
        let read = |name: &str| std::fs::read(dir.path().join(name)).expect("artifact");
        (read("ensemble.json"), read("terminal.csv"), read("manifest.json"))
    };
    let a = run();
    let b = run();
    (
        a == b,
        format!(
            "ensemble.json {} bytes, terminal.csv {} bytes, manifest identical: {}",
            a.0.len(),
            a.1.len(),
            a.2 == b.2
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("resolvent linear oracle", resolvent_linear_oracle),
        ("c(lambda) decay", c_lambda_decay),
        ("diffeomorphism", diffeomorphism),
        ("uniform ellipticity", ellipticity),
        ("law equivalence", law_equivalence),
        ("Jacobian cross-route", jacobian_cross_route),
        ("Malliavin derivative", malliavin_derivative),
        ("nondegeneracy", nondegeneracy),
        ("density change of variables", change_of_variables),
        ("Nourdin-Viens reconstruction", nourdin_viens),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = f();
        failed += usize::from(!pass);
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
