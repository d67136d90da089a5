//! The resolvent equation `λψ − Lψ = b` with `L = ½ Tr(σσ* D²) + b·D`,
//! solved componentwise on a truncated box by finite differences, plus a
//! Feynman–Kac Monte-Carlo estimator used to cross-check the grid solution.

mod grid;
mod mc;

pub use grid::GridFunction;
pub use mc::{solve_resolvent_mc, McEstimate};

use serde::Serialize;

use crate::linalg;
use crate::model::SdeProblem;
use crate::scalar::to_f64_vec;
use crate::{Error, Real, Result};

/// λ candidates tried by [`auto_lambda`], smallest first.
pub const AUTO_LAMBDAS: [f64; 5] = [10.0, 20.0, 40.0, 80.0, 160.0];
/// `c(λ)` threshold of the automatic λ policy.
pub const AUTO_C_LAMBDA: f64 = 0.5;
/// Width of the layer next to `∂[-R, R]^d` that downstream code never reads.
pub const DEFAULT_BUFFER: f64 = 2.0;

/// Boundary data used on `∂[-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// `ψ = b/λ`.
    DriftOverLambda,
    /// `ψ = (λI − Db)⁻¹ b`, falling back to `b/λ` where `‖Db‖ > λ/2`.
    LinearizedDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventConfig {
    pub lambda: f64,
    pub radius: f64,
    pub spacing: f64,
    pub buffer: f64,
    pub boundary: BoundaryRule,
    /// Sup-norm of a relaxation sweep's update at which iteration stops.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Successive over-relaxation factor; 1 is Gauss–Seidel.
    pub relaxation: f64,
    /// Regularity exponent `α ∈ (0, θ)` carried as metadata only.
    pub alpha: Option<f64>,
}

impl ResolventConfig {
    pub fn new(lambda: f64, radius: f64, spacing: f64) -> Self {
        Self {
            lambda,
            radius,
            spacing,
            buffer: DEFAULT_BUFFER,
            boundary: BoundaryRule::LinearizedDrift,
            tolerance: 1e-10,
            max_sweeps: 2_000_000,
            relaxation: 1.0,
            alpha: None,
        }
    }
}

/// Grid solution `ψ_λ` with nodal derivatives and diagnostics.
#[derive(Debug, Clone)]
pub struct ResolventSolution<T> {
    pub lambda: T,
    /// `ψ_λ`, `d` components.
    pub psi: GridFunction<T>,
    /// `Dψ_λ`, entry `c·d + j = ∂_j ψ^c`: centered differences of `psi`.
    pub dpsi: GridFunction<T>,
    /// `D²ψ_λ`, entry `c·d² + j·d + l = ∂_j ∂_l ψ^c`.
    pub d2psi: GridFunction<T>,
    /// Sup over interior nodes of `|λψ − L_hψ − b|`.
    pub residual_sup: T,
    /// `1e-3·(1 + sup|b|)` over the grid.
    pub residual_tolerance: T,
    /// Sup over interior nodes of the operator norm of `Dψ_λ`.
    pub c_lambda: T,
    /// Sup over all nodes of `|ψ_λ|`.
    pub psi_sup: T,
    pub alpha: Option<f64>,
    pub buffer: T,
    pub boundary: BoundaryRule,
    pub sweeps: usize,
    pub upwinded_nodes: usize,
}

impl<T: Real> ResolventSolution<T> {
    pub fn dim(&self) -> usize {
        self.psi.dim()
    }

    pub fn radius(&self) -> T {
        self.psi.radius()
    }

    pub fn spacing(&self) -> T {
        self.psi.spacing()
    }

    /// Half-width of the inner box `[-R + buffer, R − buffer]^d`.
    pub fn inner_radius(&self) -> T {
        self.radius() - self.buffer
    }

    pub fn residual_ok(&self) -> bool {
        self.residual_sup <= self.residual_tolerance
    }

    pub fn summary(&self) -> ResolventSummary {
        ResolventSummary {
            lambda: self.lambda.as_f64(),
            radius: self.radius().as_f64(),
            spacing: self.spacing().as_f64(),
            buffer: self.buffer.as_f64(),
            residual_sup: self.residual_sup.as_f64(),
            residual_tolerance: self.residual_tolerance.as_f64(),
            c_lambda: self.c_lambda.as_f64(),
            psi_sup: self.psi_sup.as_f64(),
            alpha: self.alpha,
            boundary: self.boundary,
            sweeps: self.sweeps,
            upwinded_nodes: self.upwinded_nodes,
            regularity_note: "grid solution; C^{2+alpha} regularity not certified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSummary {
    pub lambda: f64,
    pub radius: f64,
    pub spacing: f64,
    pub buffer: f64,
    pub residual_sup: f64,
    pub residual_tolerance: f64,
    pub c_lambda: f64,
    pub psi_sup: f64,
    pub alpha: Option<f64>,
    pub boundary: BoundaryRule,
    pub sweeps: usize,
    pub upwinded_nodes: usize,
    pub regularity_note: &'static str,
}

fn check_grid<T: Real>(g: &GridFunction<T>) -> Result<()> {
    if g.nodes_per_axis() < 5 {
        return Err(Error::GridTooCoarse {
            nodes: g.nodes_per_axis(),
        });
    }
    Ok(())
}

fn multi_offset(multi: &[usize], axis: usize, delta: isize, nodes: usize) -> usize {
    let mut acc = 0usize;
    for (a, &i) in multi.iter().enumerate().rev() {
        let v = if a == axis { (i as isize + delta) as usize } else { i };
        acc = acc * nodes + v;
    }
    acc
}

fn diag_offset(multi: &[usize], j: usize, dj: isize, l: usize, dl: isize, nodes: usize) -> usize {
    let mut acc = 0usize;
    for (a, &i) in multi.iter().enumerate().rev() {
        let v = if a == j {
            (i as isize + dj) as usize
        } else if a == l {
            (i as isize + dl) as usize
        } else {
            i
        };
        acc = acc * nodes + v;
    }
    acc
}

/// `Lψ = ½ Tr(σσ* D²ψ) + b·Dψ` at interior nodes by centered second-order
/// differences, componentwise on every `ψ^c`. Boundary nodes are left at 0.
pub fn apply_kolmogorov<T: Real>(problem: &SdeProblem<T>, psi: &GridFunction<T>) -> Result<GridFunction<T>> {
    check_grid(psi)?;
    let d = psi.dim();
    if d != problem.dim() {
        return Err(Error::DimensionMismatch("grid and problem dimension".into()));
    }
    let nc = psi.ncomp();
    let n = psi.nodes_per_axis();
    let h = psi.spacing();
    let (two, four) = (T::lit(2.0), T::lit(4.0));
    let mut out = GridFunction::zeros(d, psi.radius(), h, nc)?;
    let mut x = vec![T::zero(); d];
    let mut multi = vec![0usize; d];
    let mut b = vec![T::zero(); d];
    let mut sig = vec![T::zero(); d * problem.noise_dim()];
    let mut a = vec![T::zero(); d * d];
    for node in 0..psi.node_count() {
        if psi.is_boundary(node) {
            continue;
        }
        psi.node_coords(node, &mut x);
        psi.node_multi_index(node, &mut multi);
        problem.drift().eval_into(&x, &mut b);
        problem.diffusion_matrix(&x, &mut sig, &mut a);
        for c in 0..nc {
            let u = |idx: usize| psi.node_values(idx)[c];
            let u0 = u(node);
            let mut acc = T::zero();
            for j in 0..d {
                let up = u(multi_offset(&multi, j, 1, n));
                let um = u(multi_offset(&multi, j, -1, n));
                acc += T::lit(0.5) * a[j * d + j] * (up - two * u0 + um) / (h * h);
                acc += b[j] * (up - um) / (two * h);
                for l in (j + 1)..d {
                    let pp = u(diag_offset(&multi, j, 1, l, 1, n));
                    let pm = u(diag_offset(&multi, j, 1, l, -1, n));
                    let mp = u(diag_offset(&multi, j, -1, l, 1, n));
                    let mm = u(diag_offset(&multi, j, -1, l, -1, n));
                    acc += a[j * d + l] * (pp - pm - mp + mm) / (four * h * h);
                }
            }
            out.node_values_mut(node)[c] = acc;
        }
    }
    Ok(out)
}

/// Assembled rows of `λ − L_h` at interior nodes.
struct Discretization<T> {
    rows: Vec<Row<T>>,
    entries: Vec<(usize, T)>,
    upwinded: usize,
}

struct Row<T> {
    node: usize,
    diag: T,
    start: usize,
    end: usize,
}

impl<T: Real> Discretization<T> {
    fn apply_row(&self, row: &Row<T>, u: &[T]) -> T {
        let mut s = row.diag * u[row.node];
        for &(nb, coef) in &self.entries[row.start..row.end] {
            s += coef * u[nb];
        }
        s
    }
}

fn assemble<T: Real>(
    problem: &SdeProblem<T>,
    lambda: T,
    layout: &GridFunction<T>,
    drift_nodes: &[T],
) -> Result<Discretization<T>> {
    let d = layout.dim();
    let k = problem.noise_dim();
    let n = layout.nodes_per_axis();
    let h = layout.spacing();
    let two = T::lit(2.0);
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut upwinded = 0;
    let mut x = vec![T::zero(); d];
    let mut multi = vec![0usize; d];
    let mut sig = vec![T::zero(); d * k];
    let mut a = vec![T::zero(); d * d];
    for node in 0..layout.node_count() {
        if layout.is_boundary(node) {
            continue;
        }
        layout.node_coords(node, &mut x);
        layout.node_multi_index(node, &mut multi);
        problem.diffusion_matrix(&x, &mut sig, &mut a);
        if linalg::inverse(&a, d).is_none() {
            return Err(Error::SingularDiffusion { point: to_f64_vec(&x) });
        }
        let b = &drift_nodes[node * d..(node + 1) * d];
        let start = entries.len();
        let mut diag = lambda;
        let mut node_upwinded = false;
        for j in 0..d {
            let diff = T::lit(0.5) * a[j * d + j];
            let plus = multi_offset(&multi, j, 1, n);
            let minus = multi_offset(&multi, j, -1, n);
            diag += two * diff / (h * h);
            let mut cp = -diff / (h * h);
            let mut cm = -diff / (h * h);
            let peclet = if diff > T::zero() {
                b[j].abs() * h / diff
            } else {
                T::infinity()
            };
            if peclet <= two {
                cp -= b[j] / (two * h);
                cm += b[j] / (two * h);
            } else {
                node_upwinded = true;
                if b[j] > T::zero() {
                    cp -= b[j] / h;
                    diag += b[j] / h;
                } else {
                    cm += b[j] / h;
                    diag -= b[j] / h;
                }
            }
            entries.push((plus, cp));
            entries.push((minus, cm));
            for l in (j + 1)..d {
                let q = a[j * d + l] / (T::lit(4.0) * h * h);
                if q != T::zero() {
                    entries.push((diag_offset(&multi, j, 1, l, 1, n), -q));
                    entries.push((diag_offset(&multi, j, 1, l, -1, n), q));
                    entries.push((diag_offset(&multi, j, -1, l, 1, n), q));
                    entries.push((diag_offset(&multi, j, -1, l, -1, n), -q));
                }
            }
        }
        if !(diag > T::zero()) {
            return Err(Error::SolverStalled {
                lambda: lambda.as_f64(),
                reason: "nonpositive diagonal".into(),
            });
        }
        upwinded += usize::from(node_upwinded);
        rows.push(Row {
            node,
            diag,
            start,
            end: entries.len(),
        });
    }
    Ok(Discretization {
        rows,
        entries,
        upwinded,
    })
}

/// Dirichlet data at a boundary node.
fn boundary_value<T: Real>(
    problem: &SdeProblem<T>,
    rule: BoundaryRule,
    lambda: T,
    h: T,
    x: &[T],
    b: &[T],
    out: &mut [T],
) {
    let d = x.len();
    for (o, &bi) in out.iter_mut().zip(b) {
        *o = bi / lambda;
    }
    if rule == BoundaryRule::DriftOverLambda {
        return;
    }
    // (λI − Db) ψ = b with Db by centered differences.
    let mut m = vec![T::zero(); d * d];
    let mut probe = x.to_vec();
    let (mut bp, mut bm) = (vec![T::zero(); d], vec![T::zero(); d]);
    for j in 0..d {
        probe[j] = x[j] + h;
        problem.drift().eval_into(&probe, &mut bp);
        probe[j] = x[j] - h;
        problem.drift().eval_into(&probe, &mut bm);
        probe[j] = x[j];
        for i in 0..d {
            m[i * d + j] = -(bp[i] - bm[i]) / (T::lit(2.0) * h);
        }
    }
    if linalg::op_norm(&m, d) > T::lit(0.5) * lambda {
        return;
    }
    for i in 0..d {
        m[i * d + i] += lambda;
    }
    let mut rhs = b.to_vec();
    if linalg::solve_in_place(&m, d, &mut rhs) && rhs.iter().all(|v| v.is_finite()) {
        out.copy_from_slice(&rhs);
    }
}

/// Solves `λψ − Lψ = b` on `[-R, R]^d` with default settings.
pub fn solve_resolvent_fd<T: Real>(
    problem: &SdeProblem<T>,
    lambda: f64,
    radius: f64,
    spacing: f64,
) -> Result<ResolventSolution<T>> {
    solve_resolvent_fd_with(problem, &ResolventConfig::new(lambda, radius, spacing))
}

pub fn solve_resolvent_fd_with<T: Real>(
    problem: &SdeProblem<T>,
    config: &ResolventConfig,
) -> Result<ResolventSolution<T>> {
    let d = problem.dim();
    if !(1..=2).contains(&d) {
        return Err(Error::Unsupported(format!("grid resolvent solver in dimension {d}")));
    }
    if !(config.lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "λ must be positive, got {}",
            config.lambda
        )));
    }
    if !(config.relaxation > 0.0 && config.relaxation < 2.0) {
        return Err(Error::InvalidInput("relaxation factor must lie in (0, 2)".into()));
    }
    let lambda = T::lit(config.lambda);
    let radius = T::lit(config.radius);
    let buffer = T::lit(config.buffer);
    if !(buffer >= T::zero() && buffer < radius) {
        return Err(Error::InvalidInput("buffer must lie in [0, R)".into()));
    }
    if problem.x0().iter().any(|&v| v.abs() >= radius - buffer) {
        return Err(Error::InvalidInput(format!(
            "x0 = {:?} not inside the inner box of half-width {}",
            to_f64_vec(problem.x0()),
            config.radius - config.buffer
        )));
    }

    let layout = GridFunction::zeros(d, radius, T::lit(config.spacing), d)?;
    check_grid(&layout)?;
    let h = layout.spacing();
    let drift_nodes = GridFunction::from_fn(d, radius, h, d, |x, o| problem.drift().eval_into(x, o))?;
    let bvals = drift_nodes.values();
    let disc = assemble(problem, lambda, &layout, bvals)?;

    let mut psi = layout;
    let mut x = vec![T::zero(); d];
    let mut bc = vec![T::zero(); d];
    for node in 0..psi.node_count() {
        if psi.is_boundary(node) {
            psi.node_coords(node, &mut x);
            boundary_value(
                problem,
                config.boundary,
                lambda,
                h,
                &x,
                &bvals[node * d..(node + 1) * d],
                &mut bc,
            );
            psi.node_values_mut(node).copy_from_slice(&bc);
        } else {
            // Leading-order guess.
            for c in 0..d {
                psi.node_values_mut(node)[c] = bvals[node * d + c] / lambda;
            }
        }
    }

    let tol = T::tol(config.tolerance, 100.0);
    let omega = T::lit(config.relaxation);
    let nodes = psi.node_count();
    let mut u = vec![T::zero(); nodes];
    let mut rhs = vec![T::zero(); nodes];
    let mut max_sweeps_used = 0;
    for c in 0..d {
        for node in 0..nodes {
            u[node] = psi.values()[node * d + c];
            rhs[node] = bvals[node * d + c];
        }
        let sweeps = relax(&disc, &mut u, &rhs, omega, tol, config.max_sweeps, lambda)?;
        max_sweeps_used = max_sweeps_used.max(sweeps);
        for node in 0..nodes {
            psi.values_mut()[node * d + c] = u[node];
        }
    }

    let mut residual_sup = T::zero();
    for c in 0..d {
        for node in 0..nodes {
            u[node] = psi.values()[node * d + c];
        }
        for row in &disc.rows {
            let r = disc.apply_row(row, &u) - bvals[row.node * d + c];
            residual_sup = residual_sup.max(r.abs());
        }
    }
    let b_sup = bvals.iter().fold(T::zero(), |m, v| m.max(v.abs()));

    let (dpsi, d2psi) = differentiate(&psi)?;
    let mut c_lambda = T::zero();
    for node in 0..nodes {
        if !psi.is_boundary(node) {
            c_lambda = c_lambda.max(linalg::op_norm(dpsi.node_values(node), d));
        }
    }
    let psi_sup = (0..nodes).fold(T::zero(), |m, node| m.max(linalg::norm(psi.node_values(node))));

    Ok(ResolventSolution {
        lambda,
        psi,
        dpsi,
        d2psi,
        residual_sup,
        residual_tolerance: T::lit(1e-3) * (T::one() + b_sup),
        c_lambda,
        psi_sup,
        alpha: config.alpha,
        buffer,
        boundary: config.boundary,
        sweeps: max_sweeps_used,
        upwinded_nodes: disc.upwinded,
    })
}

/// Relaxation sweeps until the update sup-norm falls below `tol`.
fn relax<T: Real>(
    disc: &Discretization<T>,
    u: &mut [T],
    rhs: &[T],
    omega: T,
    tol: T,
    max_sweeps: usize,
    lambda: T,
) -> Result<usize> {
    let scale = u.iter().chain(rhs).fold(T::one(), |m, v| m.max(v.abs()));
    for sweep in 1..=max_sweeps {
        let mut delta = T::zero();
        for row in &disc.rows {
            let mut off = T::zero();
            for &(nb, coef) in &disc.entries[row.start..row.end] {
                off += coef * u[nb];
            }
            let target = (rhs[row.node] - off) / row.diag;
            let step = omega * (target - u[row.node]);
            u[row.node] += step;
            delta = delta.max(step.abs());
        }
        if !delta.is_finite() || delta > T::lit(1e8) * scale {
            return Err(Error::SolverStalled {
                lambda: lambda.as_f64(),
                reason: format!("iteration diverged at sweep {sweep}"),
            });
        }
        if delta < tol {
            return Ok(sweep);
        }
    }
    Err(Error::SolverStalled {
        lambda: lambda.as_f64(),
        reason: format!("no convergence within {max_sweeps} sweeps"),
    })
}

/// Nodal first derivatives (centered inside, one-sided on the outer layer,
/// matching the interpolant's nodal gradient) and second derivatives
/// (centered inside, copied from the nearest interior node on the outer layer).
fn differentiate<T: Real>(psi: &GridFunction<T>) -> Result<(GridFunction<T>, GridFunction<T>)> {
    let d = psi.dim();
    let nc = psi.ncomp();
    let n = psi.nodes_per_axis();
    let h = psi.spacing();
    let two = T::lit(2.0);
    let mut dpsi = GridFunction::zeros(d, psi.radius(), h, nc * d)?;
    let mut d2psi = GridFunction::zeros(d, psi.radius(), h, nc * d * d)?;
    let mut multi = vec![0usize; d];
    let mut inner = vec![0usize; d];
    for node in 0..psi.node_count() {
        psi.node_multi_index(node, &mut multi);
        for c in 0..nc {
            let u = |idx: usize| psi.node_values(idx)[c];
            for j in 0..d {
                let i = multi[j];
                let g = if i == 0 {
                    (u(multi_offset(&multi, j, 1, n)) - u(node)) / h
                } else if i == n - 1 {
                    (u(node) - u(multi_offset(&multi, j, -1, n))) / h
                } else {
                    (u(multi_offset(&multi, j, 1, n)) - u(multi_offset(&multi, j, -1, n))) / (two * h)
                };
                dpsi.node_values_mut(node)[c * d + j] = g;
            }
            for (q, &m) in inner.iter_mut().zip(&multi) {
                *q = m.clamp(1, n - 2);
            }
            let at = psi.node_index(&inner);
            for j in 0..d {
                for l in 0..d {
                    let v = if j == l {
                        (u(multi_offset(&inner, j, 1, n)) - two * u(at) + u(multi_offset(&inner, j, -1, n))) / (h * h)
                    } else {
                        (u(diag_offset(&inner, j, 1, l, 1, n))
                            - u(diag_offset(&inner, j, 1, l, -1, n))
                            - u(diag_offset(&inner, j, -1, l, 1, n))
                            + u(diag_offset(&inner, j, -1, l, -1, n)))
                            / (T::lit(4.0) * h * h)
                    };
                    d2psi.node_values_mut(node)[c * d * d + j * d + l] = v;
                }
            }
        }
    }
    Ok((dpsi, d2psi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub c_lambda: f64,
    pub residual_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaSweep {
    pub rows: Vec<SweepRow>,
    pub strictly_decreasing: bool,
}

/// Solves for every λ (ascending) and tabulates `c(λ)`.
pub fn lambda_sweep<T: Real>(
    problem: &SdeProblem<T>,
    lambdas: &[f64],
    radius: f64,
    spacing: f64,
) -> Result<LambdaSweep> {
    if lambdas.is_empty() {
        return Err(Error::InvalidInput("empty λ list".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "λ list must be positive and strictly ascending".into(),
        ));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let sol = solve_resolvent_fd::<T>(problem, lambda, radius, spacing).map_err(|e| Error::SweepFailed {
            lambda,
            source: Box::new(e),
        })?;
        rows.push(SweepRow {
            lambda,
            c_lambda: sol.c_lambda.as_f64(),
            residual_sup: sol.residual_sup.as_f64(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].c_lambda < w[0].c_lambda);
    Ok(LambdaSweep {
        rows,
        strictly_decreasing,
    })
}

/// Smallest λ in [`AUTO_LAMBDAS`] whose solution has `c(λ) <` [`AUTO_C_LAMBDA`].
pub fn auto_lambda<T: Real>(problem: &SdeProblem<T>, radius: f64, spacing: f64) -> Result<ResolventSolution<T>> {
    let mut last = None;
    for &lambda in &AUTO_LAMBDAS {
        let sol = solve_resolvent_fd::<T>(problem, lambda, radius, spacing)?;
        if sol.c_lambda < T::lit(AUTO_C_LAMBDA) {
            return Ok(sol);
        }
        last = Some(sol.c_lambda.as_f64());
    }
    Err(Error::LambdaTooSmall {
        c_lambda: last.unwrap_or(f64::INFINITY),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiffusionSpec, DriftSpec, ProblemSpec};

    fn problem_1d(drift: DriftSpec, diffusion: DiffusionSpec) -> SdeProblem<f64> {
        ProblemSpec {
            dim: 1,
            x0: vec![0.0],
            horizon: 1.0,
            theta: 0.5,
            drift,
            diffusion,
        }
        .build()
        .unwrap()
    }

    fn interior_values(g: &GridFunction<f64>) -> Vec<(f64, f64)> {
        let mut x = [0.0];
        (0..g.node_count())
            .filter(|&n| !g.is_boundary(n))
            .map(|n| {
                g.node_coords(n, &mut x);
                (x[0], g.node_values(n)[0])
            })
            .collect()
    }

    #[test]
    fn kolmogorov_of_constant_vanishes() {
        let p = problem_1d(
            DriftSpec::SqrtAbs { scale: 1.0 },
            DiffusionSpec::Constant { value: 1.3 },
        );
        let psi = GridFunction::from_fn(1, 2.0, 0.1, 1, |_, o| o[0] = 4.0).unwrap();
        let l = apply_kolmogorov(&p, &psi).unwrap();
        assert!(l.values().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn kolmogorov_of_linear_function() {
        let beta = 0.7;
        let p = problem_1d(DriftSpec::Linear { beta }, DiffusionSpec::Constant { value: 2.0 });
        let psi = GridFunction::from_fn(1, 2.0, 0.1, 1, |x, o| o[0] = x[0]).unwrap();
        for (x, v) in interior_values(&apply_kolmogorov(&p, &psi).unwrap()) {
            assert!((v - beta * x).abs() < 1e-10, "{x}: {v}");
        }
    }

    #[test]
    fn kolmogorov_of_square() {
        let s = 1.5;
        let p = problem_1d(DriftSpec::Zero, DiffusionSpec::Constant { value: s });
        let psi = GridFunction::from_fn(1, 2.0, 0.1, 1, |x, o| o[0] = x[0] * x[0]).unwrap();
        for (_, v) in interior_values(&apply_kolmogorov(&p, &psi).unwrap()) {
            assert!((v - s * s).abs() < 1e-9);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = problem_1d(DriftSpec::Zero, DiffusionSpec::Constant { value: 1.0 });
        let psi = GridFunction::zeros(1, 1.0, 1.0, 1).unwrap();
        assert_eq!(
            apply_kolmogorov(&p, &psi).unwrap_err(),
            Error::GridTooCoarse { nodes: 3 }
        );
    }

    #[test]
    fn zero_drift_gives_zero_solution() {
        let p = problem_1d(DriftSpec::Zero, DiffusionSpec::Constant { value: 1.0 });
        let sol = solve_resolvent_fd::<f64>(&p, 10.0, 5.0, 0.05).unwrap();
        assert!(sol.psi.values().iter().all(|&v| v == 0.0));
        assert_eq!(sol.residual_sup, 0.0);
        assert_eq!(sol.c_lambda, 0.0);
    }

    #[test]
    fn constant_drift_gives_constant_solution() {
        let p = problem_1d(
            DriftSpec::Constant { value: 3.0 },
            DiffusionSpec::Constant { value: 1.0 },
        );
        let sol = solve_resolvent_fd::<f64>(&p, 10.0, 5.0, 0.05).unwrap();
        assert!(sol.psi.values().iter().all(|&v| (v - 0.3).abs() < 1e-9));
        assert!(sol.c_lambda < 1e-8);
    }

    #[test]
    fn linear_drift_matches_closed_form() {
        let p = problem_1d(DriftSpec::Linear { beta: 1.0 }, DiffusionSpec::Constant { value: 1.0 });
        let sol = solve_resolvent_fd::<f64>(&p, 10.0, 10.0, 0.05).unwrap();
        for (x, v) in interior_values(&sol.psi) {
            assert!((v - x / 9.0).abs() < 1e-6, "{x}: {v}");
        }
        assert!((sol.c_lambda - 1.0 / 9.0).abs() < 1e-6);
        assert!(sol.residual_ok());
    }

    #[test]
    fn nodal_gradient_is_consistent_with_interpolant() {
        let p = problem_1d(
            DriftSpec::SqrtAbs { scale: 1.0 },
            DiffusionSpec::Constant { value: 1.0 },
        );
        let sol = solve_resolvent_fd::<f64>(&p, 20.0, 4.0, 0.05).unwrap();
        let mut x = [0.0];
        let (mut v, mut g) = ([0.0], [0.0]);
        for node in 0..sol.psi.node_count() {
            sol.psi.node_coords(node, &mut x);
            sol.psi.eval_with_gradient(&x, &mut v, &mut g).unwrap();
            assert!((g[0] - sol.dpsi.node_values(node)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_unsorted_lambdas() {
        let p = problem_1d(DriftSpec::Zero, DiffusionSpec::Constant { value: 1.0 });
        assert!(lambda_sweep(&p, &[10.0, 5.0], 4.0, 0.1).is_err());
    }

    #[test]
    fn sweep_of_zero_drift_is_flat() {
        let p = problem_1d(DriftSpec::Zero, DiffusionSpec::Constant { value: 1.0 });
        let s = lambda_sweep(&p, &[5.0, 10.0], 4.0, 0.1).unwrap();
        assert!(s.rows.iter().all(|r| r.c_lambda == 0.0));
    }

    #[test]
    fn two_dimensional_linear_drift() {
        let p: SdeProblem<f64> = ProblemSpec {
            dim: 2,
            x0: vec![0.0, 0.0],
            horizon: 1.0,
            theta: 0.5,
            drift: DriftSpec::Linear { beta: 1.0 },
            diffusion: DiffusionSpec::Constant { value: 1.0 },
        }
        .build()
        .unwrap();
        let sol = solve_resolvent_fd::<f64>(&p, 10.0, 4.0, 0.2).unwrap();
        let mut x = [0.0; 2];
        for node in 0..sol.psi.node_count() {
            sol.psi.node_coords(node, &mut x);
            let v = sol.psi.node_values(node);
            assert!((v[0] - x[0] / 9.0).abs() < 1e-7 && (v[1] - x[1] / 9.0).abs() < 1e-7);
        }
        assert!((sol.c_lambda - 1.0 / 9.0).abs() < 1e-6);
    }
}
