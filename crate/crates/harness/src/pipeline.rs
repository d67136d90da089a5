//! Stage runners. Every command writes into one output directory and ends
//! with a manifest listing each file with its SHA-256.

use std::path::PathBuf;

use serde::Serialize;
use zvonkin::density::{self, ChangeOfVariablesReport, NVEstimate, TransformedTerminal};
use zvonkin::flowsim::{self, Family, NondegeneracySummary, Storage};
use zvonkin::model::{self, AssumptionReport};
use zvonkin::resolvent::{self, LambdaSweep};
use zvonkin::transform::{self, DiffeoReport, EllipticityReport};
use zvonkin::{linalg, Error, PathEnsemble64, ResolventSolution64, SdeProblem64, ZvonkinTransform64};

use crate::artifacts::{svg_line_plot, ArtifactWriter, Manifest};
use crate::config::{BandwidthPolicy, ExperimentConfig, LambdaPolicy};
use crate::error::{HarnessError, HarnessResult, StageExt, EXIT_PASS, EXIT_VERIFICATION};
use crate::report::VerifyReport;
use crate::verify;

pub const MANIFEST_SCHEMA: &str = "zvonkin-manifest/1";
pub const DEFAULT_SWEEP: [f64; 4] = [10.0, 20.0, 40.0, 80.0];
/// Points of the `x` grid used by the transform audits in one dimension.
pub const AUDIT_POINTS_1D: usize = 1000;
/// Points per axis of the audit grid in two dimensions.
pub const AUDIT_POINTS_2D: usize = 41;
/// Least distance kept between audit points and the edge of the valid box;
/// at least two finite-difference steps are always kept.
pub const AUDIT_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveResolvent,
    BuildTransform,
    Simulate,
    Density,
    NvDensity,
    Verify,
    Run,
    SweepLambda,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SolveResolvent => "solve-resolvent",
            Command::BuildTransform => "build-transform",
            Command::Simulate => "simulate",
            Command::Density => "density",
            Command::NvDensity => "nv-density",
            Command::Verify => "verify",
            Command::Run => "run",
            Command::SweepLambda => "sweep-lambda",
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub manifest: PathBuf,
    pub report: Option<VerifyReport>,
    pub exit_code: i32,
}

/// Runs `cmd`, writes the manifest, and on error moves the partial artifacts
/// under `failed/` before returning the error.
pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> HarnessResult<Outcome> {
    cfg.validate()?;
    let mut w = ArtifactWriter::new(cfg.output_dir())?;
    let mut manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        status: String::new(),
        error: None,
        files: Vec::new(),
        checks: None,
    };
    let result = w
        .write_json("config.json", &cfg.canonical())
        .and_then(|_| dispatch(cmd, cfg, &mut w));
    match result {
        Ok(report) => {
            let pass = report.as_ref().is_none_or(|r| r.pass);
            manifest.status = if pass { "pass" } else { "verification_failed" }.into();
            manifest.checks = report
                .as_ref()
                .map(|r| serde_json::to_value(r).expect("report serialises"));
            let path = w.finish(manifest)?;
            Ok(Outcome {
                manifest: path,
                report,
                exit_code: if pass { EXIT_PASS } else { EXIT_VERIFICATION },
            })
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            w.fail(manifest)?;
            Err(e)
        }
    }
}

fn dispatch(cmd: Command, cfg: &ExperimentConfig, w: &mut ArtifactWriter) -> HarnessResult<Option<VerifyReport>> {
    let p = build_problem(cfg)?;
    match cmd {
        Command::SweepLambda => {
            stage_sweep(cfg, &p, w)?;
            return Ok(None);
        }
        Command::Verify => return verify::run_verify(cfg, &p, w).map(Some),
        _ => {}
    }
    let sol = stage_resolvent(cfg, &p, w)?;
    if cmd == Command::SolveResolvent {
        return Ok(None);
    }
    let t = stage_transform(&p, sol, w)?;
    if cmd == Command::BuildTransform {
        return Ok(None);
    }
    let sim = stage_simulate(cfg, &p, &t, w)?;
    if cmd == Command::Simulate {
        return Ok(None);
    }
    // One-dimensional stages; `run` skips them in higher dimension.
    let one_dim = t.dim() == 1 || cmd != Command::Run;
    if one_dim && cmd != Command::NvDensity {
        stage_density(cfg, &t, &sim, w)?;
        if cmd == Command::Density {
            return Ok(None);
        }
    }
    if one_dim {
        stage_nv(cfg, &t, &sim.ensemble, w)?;
    }
    if cmd == Command::NvDensity {
        return Ok(None);
    }
    verify::run_verify(cfg, &p, w).map(Some)
}

pub fn build_problem(cfg: &ExperimentConfig) -> HarnessResult<SdeProblem64> {
    cfg.problem.build().map_err(|e| HarnessError::Config(e.to_string()))
}

/// Solves the resolvent equation under the configured λ policy.
pub fn solve(cfg: &ExperimentConfig, p: &SdeProblem64) -> zvonkin::Result<ResolventSolution64> {
    match cfg.lambda {
        LambdaPolicy::Auto => resolvent::auto_lambda(p, cfg.grid.radius, cfg.grid.spacing),
        LambdaPolicy::Fixed { value } => resolvent::solve_resolvent_fd(p, value, cfg.grid.radius, cfg.grid.spacing),
    }
}

/// Sample grid over the inner box for the assumption audit.
pub fn assumption_grid(sol: &ResolventSolution64) -> Vec<Vec<f64>> {
    let r = sol.inner_radius();
    let spacing = if sol.dim() == 1 { 0.05 } else { 2.0 * r / 40.0 };
    model::box_grid(sol.dim(), -r, r, spacing)
}

/// `x` grid strictly inside the valid box of `t`.
pub fn audit_grid(t: &ZvonkinTransform64) -> Vec<Vec<f64>> {
    let r = t.valid_radius() - AUDIT_MARGIN.max(2.0 * t.fd_step());
    if t.dim() == 1 {
        density::uniform_grid(-r, r, AUDIT_POINTS_1D)
            .into_iter()
            .map(|x| vec![x])
            .collect()
    } else {
        model::box_grid(t.dim(), -r, r, 2.0 * r / (AUDIT_POINTS_2D - 1) as f64)
    }
}

/// Infimum of the smallest eigenvalue of `a = σσ*` over `grid`.
pub fn inf_diffusion_eigenvalue(p: &SdeProblem64, grid: &[Vec<f64>]) -> f64 {
    let (d, k) = (p.dim(), p.noise_dim());
    let mut sig = vec![0.0; d * k];
    let mut a = vec![0.0; d * d];
    grid.iter()
        .map(|x| {
            p.diffusion_matrix(x, &mut sig, &mut a);
            linalg::sym_eigenvalues(&a, d)[0]
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Serialize)]
struct ResolventArtifact {
    summary: resolvent::ResolventSummary,
    assumptions: AssumptionReport,
}

fn stage_resolvent(
    cfg: &ExperimentConfig,
    p: &SdeProblem64,
    w: &mut ArtifactWriter,
) -> HarnessResult<ResolventSolution64> {
    const STAGE: &str = "solve-resolvent";
    let sol = solve(cfg, p).stage(STAGE)?;
    let assumptions = model::check_assumptions(p, &assumption_grid(&sol), 1e-3).stage(STAGE)?;
    w.write_json(
        "resolvent.json",
        &ResolventArtifact {
            summary: sol.summary(),
            assumptions,
        },
    )?;
    let d = sol.dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend((0..d).map(|c| format!("psi{c}")));
    header.extend((0..d * d).map(|e| format!("dpsi{}{}", e / d, e % d)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut x = vec![0.0; d];
    let rows = (0..sol.psi.node_count()).map(|n| {
        sol.psi.node_coords(n, &mut x);
        let mut row = x.clone();
        row.extend_from_slice(sol.psi.node_values(n));
        row.extend_from_slice(sol.dpsi.node_values(n));
        row
    });
    w.write_csv("psi.csv", &header, rows)?;
    Ok(sol)
}

#[derive(Serialize)]
struct TransformArtifact {
    summary: transform::TransformSummary,
    diffeomorphism: DiffeoReport,
    ellipticity: EllipticityReport,
}

fn stage_transform(
    p: &SdeProblem64,
    sol: ResolventSolution64,
    w: &mut ArtifactWriter,
) -> HarnessResult<ZvonkinTransform64> {
    const STAGE: &str = "build-transform";
    let t = transform::build_transform(sol, p).stage(STAGE)?;
    let xgrid = audit_grid(&t);
    let diffeo = transform::verify_diffeo(&t, &xgrid, t.fd_step()).stage(STAGE)?;
    let ygrid = transform::image_grid(&t, &xgrid).stage(STAGE)?;
    let ellipticity = transform::verify_ellipticity(&t, &ygrid).stage(STAGE)?;
    w.write_json(
        "transform.json",
        &TransformArtifact {
            summary: t.summary(),
            diffeomorphism: diffeo,
            ellipticity,
        },
    )?;
    if t.dim() == 1 {
        let mut rows = Vec::with_capacity(xgrid.len());
        for (x, y) in xgrid.iter().zip(&ygrid) {
            let pb = t.pullback(y).stage(STAGE)?;
            let (mut b, mut s) = ([0.0], vec![0.0; t.noise_dim()]);
            t.coefficients_at(&pb, &mut b, &mut s);
            rows.push(vec![x[0], y[0], t.dphi(x).stage(STAGE)?[0], b[0], s[0]]);
        }
        w.write_csv("transform.csv", &["x", "phi", "dphi", "btilde", "sigmatilde"], rows)?;
    }
    Ok(t)
}

/// Ensemble with the nondegeneracy certificate computed on the same paths.
pub struct Simulation {
    pub ensemble: PathEnsemble64,
    pub certificate: NondegeneracySummary,
}

fn stage_simulate(
    cfg: &ExperimentConfig,
    p: &SdeProblem64,
    t: &ZvonkinTransform64,
    w: &mut ArtifactWriter,
) -> HarnessResult<Simulation> {
    const STAGE: &str = "simulate";
    let sc = &cfg.simulation;
    let storage = if sc.full_paths {
        Storage::Full
    } else {
        Storage::Terminal
    };
    let ens = flowsim::simulate_equivalent_pair(p, t, sc.n_paths, sc.dt, cfg.seed, storage).stage(STAGE)?;
    ens.check_escapes().stage(STAGE)?;
    w.write_json("ensemble.json", &ens.summary().stage(STAGE)?)?;
    let d = ens.dim;
    let mut header = vec!["path_index".to_string(), "escaped".to_string()];
    for fam in ["x_direct", "y", "x_mapped"] {
        header.extend((0..d).map(|c| format!("{fam}{c}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let nan = vec![f64::NAN; d];
    let rows = ens.records.iter().map(|r| {
        let mut row = vec![r.path_index as f64, if r.escaped() { 1.0 } else { 0.0 }];
        for fam in [Family::XDirect, Family::Y, Family::XMapped] {
            row.extend_from_slice(r.terminal(fam).unwrap_or(&nan));
        }
        row
    });
    w.write_csv("terminal.csv", &header, rows)?;
    if sc.full_paths {
        write_full_paths(&ens, w)?;
    }
    let g = cfg
        .functional
        .as_ref()
        .map(|f| f.build::<f64>())
        .transpose()
        .stage(STAGE)?;
    let certificate = flowsim::nondegeneracy_scan(t, g.as_ref(), sc.n_paths, sc.dt, cfg.seed).stage(STAGE)?;
    w.write_json("nondegeneracy.json", &certificate)?;
    Ok(Simulation {
        ensemble: ens,
        certificate,
    })
}

fn write_full_paths(ens: &PathEnsemble64, w: &mut ArtifactWriter) -> HarnessResult<()> {
    let d = ens.dim;
    let mut header = vec!["path_index".to_string(), "step".to_string(), "time".to_string()];
    for fam in ["x_direct", "y", "x_mapped"] {
        header.extend((0..d).map(|c| format!("{fam}{c}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for r in &ens.records {
        let Some(paths) = &r.paths else { continue };
        let n = paths.y.n_states().max(paths.x_direct.n_states());
        for i in 0..n {
            let mut row = vec![r.path_index as f64, i as f64, i as f64 * ens.dt];
            let xd = (i < paths.x_direct.n_states()).then(|| paths.x_direct.state(i));
            let y = (i < paths.y.n_states()).then(|| paths.y.state(i));
            let xm = paths.x_mapped.get(i * d..(i + 1) * d);
            for part in [xd, y, xm] {
                match part {
                    Some(v) => row.extend_from_slice(v),
                    None => row.extend(std::iter::repeat_n(f64::NAN, d)),
                }
            }
            rows.push(row);
        }
    }
    w.write_csv("paths.csv", &header, rows)?;
    Ok(())
}

fn bandwidth(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.density.bandwidth {
        BandwidthPolicy::Silverman => None,
        BandwidthPolicy::Fixed { value } => Some(value),
    }
}

/// Kernel estimates of `X_direct`, `X_mapped` and `Y` with the change-of-variables audit.
pub struct DensityComparison {
    pub x_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    pub rho_direct: zvonkin::DensityEstimate64,
    pub rho_mapped: zvonkin::DensityEstimate64,
    pub rho_y: zvonkin::DensityEstimate64,
    pub change_of_variables: ChangeOfVariablesReport,
    pub identity_control: f64,
}

/// `x` grid from the configured range or the pooled sample range, clipped to the valid box.
pub fn compare_densities(
    t: &ZvonkinTransform64,
    ens: &PathEnsemble64,
    points: usize,
    range: Option<[f64; 2]>,
    bw: Option<f64>,
) -> zvonkin::Result<DensityComparison> {
    if t.dim() != 1 {
        return Err(Error::Unsupported("density comparison needs d = 1".into()));
    }
    let xd = ens.terminal_samples(Family::XDirect, 0);
    let xm = ens.terminal_samples(Family::XMapped, 0);
    let y = ens.terminal_samples(Family::Y, 0);
    let limit = t.valid_radius() - 0.01;
    let [lo, hi] = match range {
        Some(r) => r,
        None => {
            let h = bw.map_or_else(|| density::silverman_bandwidth(&xd), Ok)?;
            let fold = |f: fn(f64, f64) -> f64, init| xd.iter().chain(&xm).copied().fold(init, f);
            [
                fold(f64::min, f64::INFINITY) - 4.0 * h,
                fold(f64::max, f64::NEG_INFINITY) + 4.0 * h,
            ]
        }
    };
    let x_grid = density::uniform_grid(lo.max(-limit), hi.min(limit), points);
    let rho_direct = density::kde(&xd, &x_grid, bw)?;
    let rho_mapped = density::kde(&xm, &x_grid, bw)?;
    let hy = bw.map_or_else(|| density::silverman_bandwidth(&y), Ok)?;
    let y_grid = density::default_grid(&y, hy, points);
    let rho_y = density::kde(&y, &y_grid, Some(hy))?;
    let change_of_variables = density::change_of_variables_check(&rho_direct, &rho_y, t, &x_grid)?;
    let identity_control = density::l1_distance(&rho_direct, &rho_mapped, &x_grid);
    Ok(DensityComparison {
        x_grid,
        y_grid,
        rho_direct,
        rho_mapped,
        rho_y,
        change_of_variables,
        identity_control,
    })
}

#[derive(Serialize)]
struct DensityArtifact {
    bandwidth_x_direct: f64,
    bandwidth_x_mapped: f64,
    bandwidth_y: f64,
    mass_x_direct: f64,
    mass_x_mapped: f64,
    mass_y: f64,
    n_samples: usize,
    change_of_variables: ChangeOfVariablesReport,
    identity_control_l1: f64,
    functional: Option<FunctionalArtifact>,
}

#[derive(Serialize)]
struct FunctionalArtifact {
    label: String,
    bandwidth: f64,
    mass: f64,
    certificate: NondegeneracySummary,
}

fn stage_density(
    cfg: &ExperimentConfig,
    t: &ZvonkinTransform64,
    sim: &Simulation,
    w: &mut ArtifactWriter,
) -> HarnessResult<()> {
    const STAGE: &str = "density";
    let dc = compare_densities(t, &sim.ensemble, cfg.density.points, cfg.density.range, bandwidth(cfg)).stage(STAGE)?;
    let mut pushed = Vec::with_capacity(dc.x_grid.len());
    for &u in &dc.x_grid {
        let y = t.phi(&[u]).stage(STAGE)?[0];
        pushed.push(t.dphi(&[u]).stage(STAGE)?[0].abs() * dc.rho_y.value_at(y));
    }
    let rows = (0..dc.x_grid.len()).map(|i| {
        vec![
            dc.x_grid[i],
            dc.rho_direct.values[i],
            dc.rho_mapped.values[i],
            pushed[i],
        ]
    });
    w.write_csv("density_x.csv", &["x", "x_direct", "x_mapped", "pushforward_y"], rows)?;
    let rows = dc.y_grid.iter().zip(&dc.rho_y.values).map(|(a, b)| vec![*a, *b]);
    w.write_csv("density_y.csv", &["y", "density"], rows)?;
    let svg = svg_line_plot(
        "terminal density of X",
        &[
            ("X direct", &dc.x_grid, &dc.rho_direct.values),
            ("phi^-1(Y)", &dc.x_grid, &dc.rho_mapped.values),
            ("pushforward of Y", &dc.x_grid, &pushed),
        ],
    );
    w.write_bytes("density.svg", svg.as_bytes())?;

    let functional = match &cfg.functional {
        Some(spec) => {
            let g = spec.build::<f64>().stage(STAGE)?;
            let xd = sim.ensemble.terminal_samples(Family::XDirect, 0);
            let horizon = cfg.problem.horizon;
            let fd = density::density_of_g(&g, &xd, horizon, None, &sim.certificate).stage(STAGE)?;
            let est = &fd.estimate;
            let rows = est.grid.iter().zip(&est.values).map(|(a, b)| vec![*a, *b]);
            w.write_csv("density_g.csv", &["g", "density"], rows)?;
            Some(FunctionalArtifact {
                label: g.label().to_string(),
                bandwidth: est.bandwidth,
                mass: est.mass,
                certificate: fd.certificate,
            })
        }
        None => None,
    };
    w.write_json(
        "density.json",
        &DensityArtifact {
            bandwidth_x_direct: dc.rho_direct.bandwidth,
            bandwidth_x_mapped: dc.rho_mapped.bandwidth,
            bandwidth_y: dc.rho_y.bandwidth,
            mass_x_direct: dc.rho_direct.mass,
            mass_x_mapped: dc.rho_mapped.mass,
            mass_y: dc.rho_y.mass,
            n_samples: dc.rho_direct.n_samples,
            change_of_variables: dc.change_of_variables,
            identity_control_l1: dc.identity_control,
            functional,
        },
    )?;
    Ok(())
}

/// Nourdin–Viens estimate of the law of `X_T` on a centered grid of half-width `5·std`.
pub fn nv_terminal(
    t: &ZvonkinTransform64,
    std: f64,
    points: usize,
    n_samples: usize,
    n_mehler: usize,
    dt: f64,
    seed: u64,
) -> zvonkin::Result<NVEstimate> {
    let horizon = t.problem().horizon();
    let f = TransformedTerminal {
        transform: t,
        n_steps: flowsim::step_count(horizon, dt),
        dt,
    };
    let half = 5.0 * std.max(1e-6);
    let z_grid = density::uniform_grid(-half, half, points.max(3) | 1);
    density::nourdin_viens_density(&f, n_samples, n_mehler, &z_grid, seed)
}

fn stage_nv(
    cfg: &ExperimentConfig,
    t: &ZvonkinTransform64,
    ens: &PathEnsemble64,
    w: &mut ArtifactWriter,
) -> HarnessResult<()> {
    const STAGE: &str = "nv-density";
    if t.dim() != 1 {
        return Err(Error::Unsupported(
            "Nourdin-Viens reconstruction needs d = k = 1".into(),
        ))
        .stage(STAGE);
    }
    let std = flowsim::moments(&ens.terminal_samples(Family::XMapped, 0))
        .variance
        .sqrt();
    let est = nv_terminal(
        t,
        std,
        cfg.density.points,
        cfg.density.nv_samples,
        cfg.density.n_mehler,
        cfg.simulation.dt,
        cfg.seed,
    )
    .stage(STAGE)?;
    let x = est.density_grid();
    let rows = (0..x.len()).map(|i| vec![x[i], est.z_grid[i], est.density_values[i], est.g_values[i]]);
    w.write_csv("nv.csv", &["x", "z", "density", "g"], rows)?;
    w.write_bytes(
        "nv.svg",
        svg_line_plot("Nourdin-Viens density of X_T", &[("density", &x, &est.density_values)]).as_bytes(),
    )?;
    w.write_json("nv.json", &est)?;
    Ok(())
}

fn stage_sweep(cfg: &ExperimentConfig, p: &SdeProblem64, w: &mut ArtifactWriter) -> HarnessResult<LambdaSweep> {
    let lambdas = cfg.sweep_lambdas.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
    let sweep = resolvent::lambda_sweep(p, &lambdas, cfg.grid.radius, cfg.grid.spacing).stage("sweep-lambda")?;
    let rows = sweep.rows.iter().map(|r| vec![r.lambda, r.c_lambda, r.residual_sup]);
    w.write_csv("sweep.csv", &["lambda", "c_lambda", "residual_sup"], rows)?;
    let (ls, cs): (Vec<f64>, Vec<f64>) = sweep.rows.iter().map(|r| (r.lambda, r.c_lambda)).unzip();
    w.write_bytes("sweep.svg", svg_line_plot("c(lambda)", &[("c", &ls, &cs)]).as_bytes())?;
    w.write_json("sweep.json", &sweep)?;
    Ok(sweep)
}
