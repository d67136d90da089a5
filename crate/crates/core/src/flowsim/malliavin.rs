use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::SdeProblem;
use crate::transform::{Pullback, ZvonkinTransform, MAX_DIM};
use crate::{Error, Real, Result};

use super::jacobian::{coefficient_jacobian_path, invert_jacobians, jacobian_variational_from, JacobianPath};
use super::{euler_maruyama, step_count, trapezoid_weights, BrownianGrid, FunctionalG, SamplePath};

/// Lower-triangular grid `D_{r_j} F_{t_i}` (`j ≤ i`) of `rows×cols` blocks;
/// entries with `j > i` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinGrid<T> {
    n_times: usize,
    rows: usize,
    cols: usize,
    data: Vec<T>,
    zero: Vec<T>,
}

impl<T: Real> MalliavinGrid<T> {
    fn zeros(n_times: usize, rows: usize, cols: usize) -> Self {
        let b = rows * cols;
        Self {
            n_times,
            rows,
            cols,
            data: vec![T::zero(); n_times * (n_times + 1) / 2 * b],
            zero: vec![T::zero(); b],
        }
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn offset(&self, t: usize, r: usize) -> usize {
        (t * (t + 1) / 2 + r) * self.rows * self.cols
    }

    /// Block `D_{r} F_{t}` at grid indices `(t, r)`.
    pub fn get(&self, t: usize, r: usize) -> &[T] {
        if r > t {
            return &self.zero;
        }
        let o = self.offset(t, r);
        &self.data[o..o + self.rows * self.cols]
    }

    fn get_mut(&mut self, t: usize, r: usize) -> &mut [T] {
        let o = self.offset(t, r);
        let b = self.rows * self.cols;
        &mut self.data[o..o + b]
    }

    /// `∫_0^{t} ‖D_r F_t‖² dr` by the trapezoid rule on the grid.
    pub fn norm2(&self, t: usize, dt: T) -> T {
        let w = trapezoid_weights(t + 1, dt);
        (0..=t)
            .map(|r| w[r] * self.get(t, r).iter().map(|&v| v * v).sum::<T>())
            .sum()
    }
}

/// `σ̃(Y_j)` for every state, row-major `d×k` blocks.
fn sigma_tilde_path<T: Real>(t: &ZvonkinTransform<T>, pbs: &[Pullback<T>]) -> Vec<T> {
    let (d, k) = (t.dim(), t.noise_dim());
    let mut out = vec![T::zero(); pbs.len() * d * k];
    let mut b = [T::zero(); MAX_DIM];
    for (j, pb) in pbs.iter().enumerate() {
        t.coefficients_at(pb, &mut b[..d], &mut out[j * d * k..(j + 1) * d * k]);
    }
    out
}

fn pullback_path<T: Real>(t: &ZvonkinTransform<T>, y: &SamplePath<T>) -> Result<Vec<Pullback<T>>> {
    let mut guess = t.problem().x0().to_vec();
    (0..y.n_states())
        .map(|i| {
            let pb = t.pullback_from(y.state(i), &guess)?;
            guess.copy_from_slice(&pb.x[..t.dim()]);
            Ok(pb)
        })
        .collect()
}

fn dy_from<T: Real>(jy: &JacobianPath<T>, jy_inv: &JacobianPath<T>, sig: &[T], k: usize) -> MalliavinGrid<T> {
    let d = jy.d;
    let n = jy.n_states();
    let mut grid = MalliavinGrid::zeros(n, d, k);
    let mut tmp = vec![T::zero(); d * k];
    for r in 0..n {
        linalg::matmul(jy_inv.at(r), &sig[r * d * k..(r + 1) * d * k], d, d, k, &mut tmp);
        for ti in r..n {
            linalg::matmul(jy.at(ti), &tmp, d, d, k, grid.get_mut(ti, r));
        }
    }
    grid
}

/// `D_{r_j} Y_{t_i} = JY_i (JY_j)⁻¹ σ̃(Y_j)` for `j ≤ i`.
pub fn malliavin_derivative_y<T: Real>(
    t: &ZvonkinTransform<T>,
    y: &SamplePath<T>,
    jy: &JacobianPath<T>,
    jy_inv: &JacobianPath<T>,
) -> Result<MalliavinGrid<T>> {
    if jy.n_states() != y.n_states() || jy_inv.n_states() != y.n_states() {
        return Err(Error::DimensionMismatch("Jacobian and path lengths differ".into()));
    }
    let pbs = pullback_path(t, y)?;
    Ok(dy_from(jy, jy_inv, &sigma_tilde_path(t, &pbs), t.noise_dim()))
}

fn dx_from<T: Real>(t: &ZvonkinTransform<T>, pbs: &[Pullback<T>], dy: &MalliavinGrid<T>) -> Result<MalliavinGrid<T>> {
    let (d, k) = dy.shape();
    let n = dy.n_times();
    let mut dx = MalliavinGrid::zeros(n, d, k);
    for ti in 0..n {
        let inv = t.dphi_inverse_at(&pbs[ti])?;
        for r in 0..=ti {
            let src = dy.get(ti, r).to_vec();
            linalg::matmul(&inv, &src, d, d, k, dx.get_mut(ti, r));
        }
    }
    Ok(dx)
}

/// `D_r X_t = Dφ_λ⁻¹(Y_t) · D_r Y_t`.
pub fn malliavin_derivative_x<T: Real>(
    t: &ZvonkinTransform<T>,
    y: &SamplePath<T>,
    dy: &MalliavinGrid<T>,
) -> Result<MalliavinGrid<T>> {
    if dy.n_times() != y.n_states() {
        return Err(Error::DimensionMismatch(
            "Malliavin grid and path lengths differ".into(),
        ));
    }
    let pbs = pullback_path(t, y)?;
    dx_from(t, &pbs, dy)
}

/// Terminal row `D_{r_j} X_T`, `j = 0..=n`, as `d×k` blocks.
pub fn terminal_malliavin_x<T: Real>(
    t: &ZvonkinTransform<T>,
    pbs: &[Pullback<T>],
    jy: &JacobianPath<T>,
    jy_inv: &JacobianPath<T>,
) -> Result<Vec<T>> {
    let (d, k) = (t.dim(), t.noise_dim());
    let n = jy.n_states();
    let sig = sigma_tilde_path(t, pbs);
    let mut left = vec![T::zero(); d * d];
    linalg::matmul(&t.dphi_inverse_at(&pbs[n - 1])?, jy.at(n - 1), d, d, d, &mut left);
    let mut out = vec![T::zero(); n * d * k];
    let mut tmp = vec![T::zero(); d * k];
    for j in 0..n {
        linalg::matmul(jy_inv.at(j), &sig[j * d * k..(j + 1) * d * k], d, d, k, &mut tmp);
        linalg::matmul(&left, &tmp, d, d, k, &mut out[j * d * k..(j + 1) * d * k]);
    }
    Ok(out)
}

/// Jacobians and Malliavin derivatives of one transformed path.
#[derive(Debug, Clone)]
pub struct FlowDerivatives<T> {
    pub jy: JacobianPath<T>,
    pub jy_inv: JacobianPath<T>,
    pub dy: MalliavinGrid<T>,
    pub dx: MalliavinGrid<T>,
    /// `X = φ_λ⁻¹(Y)` along the path, `d` entries per state.
    pub x: Vec<T>,
    pub dt: T,
}

/// Full lower-triangular grids; memory grows as `n_steps²`.
pub fn flow_derivatives<T: Real>(
    t: &ZvonkinTransform<T>,
    y: &SamplePath<T>,
    bg: &BrownianGrid<T>,
) -> Result<FlowDerivatives<T>> {
    let (pbs, derivs) = coefficient_jacobian_path(t, y)?;
    let jy = jacobian_variational_from(&derivs, bg, t.dim());
    let jy_inv = invert_jacobians(&jy)?;
    let dy = dy_from(&jy, &jy_inv, &sigma_tilde_path(t, &pbs), t.noise_dim());
    let dx = dx_from(t, &pbs, &dy)?;
    let x = pbs.iter().flat_map(|pb| pb.x[..t.dim()].to_vec()).collect();
    Ok(FlowDerivatives {
        jy,
        jy_inv,
        dy,
        dx,
        x,
        dt: bg.dt(),
    })
}

/// `D_r G(t_i, X_{t_i})` for `r ≤ t_i` with its squared `L²` norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DgResult<T> {
    pub row: Vec<T>,
    pub norm2: T,
    pub argmax: usize,
}

/// Chain rule `D_r G(t, X_t) = ∂_xG(t, X_t) · D_r X_t` for `d = k = 1`, after
/// checking the claimed lower bound of `|∂_xG|` on the states visited up to `t_i`.
pub fn dg_derivative<T: Real>(g: &FunctionalG<T>, flow: &FlowDerivatives<T>, t_index: usize) -> Result<DgResult<T>> {
    if flow.dx.shape() != (1, 1) {
        return Err(Error::Unsupported("functional derivative needs d = k = 1".into()));
    }
    if t_index >= flow.dx.n_times() {
        return Err(Error::InvalidInput(format!("time index {t_index} beyond the path")));
    }
    let time = flow.dt * T::from_usize(t_index).unwrap();
    g.check_lower_bound(time, flow.x[..=t_index].iter().copied())?;
    let gx = g.dx(time, flow.x[t_index]);
    let row: Vec<T> = (0..=t_index).map(|r| gx * flow.dx.get(t_index, r)[0]).collect();
    let w = trapezoid_weights(t_index + 1, flow.dt);
    let norm2 = row.iter().zip(&w).map(|(&v, &wi)| wi * v * v).sum();
    let argmax = row
        .iter()
        .enumerate()
        .fold(
            (0, T::zero()),
            |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) },
        )
        .0;
    Ok(DgResult { row, norm2, argmax })
}

/// Which path supplies the perturbed terminal value in [`malliavin_fd_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdRoute {
    /// Euler on the original equation.
    Direct,
    /// `φ_λ⁻¹` of Euler on the transformed equation.
    Transformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    pub finite_difference: Vec<f64>,
    pub analytic: Vec<f64>,
    pub relative_error: f64,
}

/// Compares `(X_T^ε − X_T)/ε` under the Cameron–Martin shift `ḣ = 1_{[r1,r2]}`
/// on noise component `component` with `∫_{r1}^{r2} D_r X_T dr`.
#[allow(clippy::too_many_arguments)]
pub fn malliavin_fd_check<T: Real>(
    problem: &SdeProblem<T>,
    t: &ZvonkinTransform<T>,
    bg: &BrownianGrid<T>,
    r1: T,
    r2: T,
    eps: T,
    component: usize,
    route: FdRoute,
) -> Result<FdCheck> {
    let (d, k) = (t.dim(), t.noise_dim());
    let horizon = bg.dt() * T::from_usize(bg.n_steps()).unwrap();
    if !(r1 >= T::zero() && r2 > r1 && r2 <= horizon * (T::one() + T::epsilon())) {
        return Err(Error::InvalidInput("need 0 ≤ r1 < r2 ≤ T".into()));
    }
    let shifted = bg.cameron_martin(r1, r2, eps, component)?;
    let y0 = t.phi(problem.x0())?;
    let y = euler_maruyama(t, &y0, problem.x0(), bg)?;
    if y.escaped() {
        return Err(Error::OutOfDomain {
            point: crate::scalar::to_f64_vec(y.terminal()),
        });
    }
    let terminal_x = |grid: &BrownianGrid<T>| -> Result<Vec<T>> {
        match route {
            FdRoute::Direct => {
                let p = euler_maruyama(problem, problem.x0(), problem.x0(), grid)?;
                Ok(p.terminal().to_vec())
            }
            FdRoute::Transformed => {
                let p = euler_maruyama(t, &y0, problem.x0(), grid)?;
                if p.escaped() {
                    return Err(Error::OutOfDomain {
                        point: crate::scalar::to_f64_vec(p.terminal()),
                    });
                }
                t.invert_phi(p.terminal())
            }
        }
    };
    let base = terminal_x(bg)?;
    let pert = terminal_x(&shifted)?;
    let fd: Vec<f64> = (0..d).map(|i| ((pert[i] - base[i]) / eps).as_f64()).collect();

    let (pbs, derivs) = coefficient_jacobian_path(t, &y)?;
    let jy = jacobian_variational_from(&derivs, bg, d);
    let jy_inv = invert_jacobians(&jy)?;
    let row = terminal_malliavin_x(t, &pbs, &jy, &jy_inv)?;
    // Trapezoid over nodes in [r1, r2], which are assumed to lie on the grid.
    let j1 = (r1 / bg.dt()).round().to_usize().unwrap();
    let j2 = (r2 / bg.dt()).round().to_usize().unwrap().min(bg.n_steps());
    let w = trapezoid_weights(j2 - j1 + 1, bg.dt());
    let analytic: Vec<f64> = (0..d)
        .map(|i| {
            (j1..=j2)
                .map(|j| w[j - j1] * row[j * d * k + i * k + component])
                .sum::<T>()
                .as_f64()
        })
        .collect();
    let denom = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    if denom < 1e-10 {
        return Err(Error::Nondiscriminating { value: denom });
    }
    let diff = fd
        .iter()
        .zip(&analytic)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(FdCheck {
        finite_difference: fd,
        analytic,
        relative_error: diff / denom,
    })
}

/// Ensemble minima of `‖D·X_T‖²` and `‖D·G(T, X_T)‖²` in `L²[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracySummary {
    pub n_paths: usize,
    pub escaped: usize,
    pub evaluated: usize,
    pub degenerate_dx: usize,
    pub degenerate_dg: usize,
    pub min_dx_norm2: f64,
    pub mean_dx_norm2: f64,
    pub min_dg_norm2: Option<f64>,
    pub mean_dg_norm2: Option<f64>,
    /// Paths where `‖DG‖² < C²‖DX‖²` despite `|∂_xG| ≥ C`.
    pub bound_violations: usize,
}

struct PathNorms {
    dx: f64,
    dg: Option<f64>,
    bound_ok: bool,
}

fn path_norms<T: Real>(
    t: &ZvonkinTransform<T>,
    g: Option<&FunctionalG<T>>,
    bg: &BrownianGrid<T>,
    y0: &[T],
) -> Result<Option<PathNorms>> {
    let y = euler_maruyama(t, y0, t.problem().x0(), bg)?;
    if y.escaped() {
        return Ok(None);
    }
    let d = t.dim();
    let (pbs, derivs) = coefficient_jacobian_path(t, &y)?;
    let jy = jacobian_variational_from(&derivs, bg, d);
    let jy_inv = invert_jacobians(&jy)?;
    let row = terminal_malliavin_x(t, &pbs, &jy, &jy_inv)?;
    let n = jy.n_states();
    let block = d * t.noise_dim();
    let w = trapezoid_weights(n, bg.dt());
    let dx: T = (0..n)
        .map(|j| w[j] * row[j * block..(j + 1) * block].iter().map(|&v| v * v).sum::<T>())
        .sum();
    let (dg, bound_ok) = match g {
        Some(g) => {
            let horizon = bg.dt() * T::from_usize(bg.n_steps()).unwrap();
            g.check_lower_bound(horizon, pbs.iter().map(|pb| pb.x[0]))?;
            let gx = g.dx(horizon, pbs[n - 1].x[0]);
            let dg = gx * gx * dx;
            let c = g.lower_bound();
            (Some(dg.as_f64()), dg >= c * c * dx)
        }
        None => (None, true),
    };
    Ok(Some(PathNorms {
        dx: dx.as_f64(),
        dg,
        bound_ok,
    }))
}

/// Evaluates the nondegeneracy criterion over `n_paths` transformed paths
/// (`d = k = 1` when `g` is given). Paths are keyed by `(seed, index)`.
pub fn nondegeneracy_scan<T: Real>(
    t: &ZvonkinTransform<T>,
    g: Option<&FunctionalG<T>>,
    n_paths: usize,
    dt: T,
    seed: u64,
) -> Result<NondegeneracySummary> {
    if g.is_some() && (t.dim() != 1 || t.noise_dim() != 1) {
        return Err(Error::Unsupported("functional nondegeneracy needs d = k = 1".into()));
    }
    if n_paths == 0 {
        return Err(Error::InsufficientSample { got: 0, need: 1 });
    }
    let n_steps = step_count(t.problem().horizon().as_f64(), dt.as_f64());
    let y0 = t.phi(t.problem().x0())?;
    let results: Vec<Option<PathNorms>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let bg = BrownianGrid::generate(seed, i as u64, n_steps, dt, t.noise_dim());
            path_norms(t, g, &bg, &y0)
        })
        .collect::<Result<_>>()?;
    let ok: Vec<&PathNorms> = results.iter().flatten().collect();
    let evaluated = ok.len();
    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::INFINITY, f64::min);
    let mean_of = |s: f64| if evaluated > 0 { s / evaluated as f64 } else { f64::NAN };
    let dg_present = g.is_some();
    Ok(NondegeneracySummary {
        n_paths,
        escaped: n_paths - evaluated,
        evaluated,
        degenerate_dx: ok.iter().filter(|p| !(p.dx > 0.0)).count(),
        degenerate_dg: ok.iter().filter(|p| p.dg.is_some_and(|v| !(v > 0.0))).count(),
        min_dx_norm2: min_of(&mut ok.iter().map(|p| p.dx)),
        mean_dx_norm2: mean_of(ok.iter().map(|p| p.dx).sum()),
        min_dg_norm2: dg_present.then(|| min_of(&mut ok.iter().filter_map(|p| p.dg))),
        mean_dg_norm2: dg_present.then(|| mean_of(ok.iter().filter_map(|p| p.dg).sum())),
        bound_violations: ok.iter().filter(|p| !p.bound_ok).count(),
    })
}
