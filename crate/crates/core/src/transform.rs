//! The diffeomorphism `φ_λ = id + ψ_λ`, its Newton inverse, and the
//! transformed coefficients
//!
//! ```text
//! b̃(y) = λ ψ_λ(φ_λ⁻¹(y)),    σ̃(y) = Dφ_λ(φ_λ⁻¹(y)) σ(φ_λ⁻¹(y)),
//! ```
//!
//! together with grid audits of the diffeomorphism bounds and of the uniform
//! ellipticity of `B = σ̃σ̃*`.

use std::sync::Arc;

use serde::Serialize;

use crate::linalg;
use crate::model::SdeProblem;
use crate::resolvent::ResolventSolution;
use crate::scalar::to_f64_vec;
use crate::{Error, Real, Result};

/// Largest state and noise dimension the transform evaluators support.
pub const MAX_DIM: usize = 2;
const MAX_NEWTON_ITERATIONS: usize = 100;

/// `x = φ_λ⁻¹(y)` together with `ψ_λ(x)` and `Dψ_λ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pullback<T> {
    pub x: [T; MAX_DIM],
    pub psi: [T; MAX_DIM],
    /// Row-major `d×d`, entry `c·d + j = ∂_j ψ^c`.
    pub dpsi: [T; MAX_DIM * MAX_DIM],
}

/// Finite-difference derivatives of the transformed coefficients at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientJacobians<T> {
    /// `Db̃`, row-major `d×d`.
    pub db: [T; MAX_DIM * MAX_DIM],
    /// `Dσ̃_l` for each noise column `l`: entry `l·d² + i·d + j = ∂_j σ̃_{il}`.
    pub dsigma: [T; MAX_DIM * MAX_DIM * MAX_DIM],
}

#[derive(Debug, Clone)]
pub struct ZvonkinTransform<T> {
    solution: Arc<ResolventSolution<T>>,
    problem: SdeProblem<T>,
    valid_radius: T,
    newton_tol: T,
    fd_step: T,
}

/// Wires `φ_λ`, its inverse and `b̃, σ̃` from a grid solution.
pub fn build_transform<T: Real>(
    solution: ResolventSolution<T>,
    problem: &SdeProblem<T>,
) -> Result<ZvonkinTransform<T>> {
    let d = problem.dim();
    if solution.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "resolvent solution has dimension {}, problem {d}",
            solution.dim()
        )));
    }
    if d > MAX_DIM || problem.noise_dim() > MAX_DIM {
        return Err(Error::Unsupported(format!(
            "transform with d = {d}, k = {}",
            problem.noise_dim()
        )));
    }
    if !(solution.c_lambda < T::one()) {
        return Err(Error::LambdaTooSmall {
            c_lambda: solution.c_lambda.as_f64(),
        });
    }
    // φ(valid box) must stay inside the interpolation box.
    let valid_radius = solution.inner_radius().min(solution.radius() - solution.psi_sup);
    if !(valid_radius > T::zero()) {
        return Err(Error::InvalidInput(format!(
            "empty validated box: inner half-width {}, sup|ψ| = {}",
            solution.inner_radius(),
            solution.psi_sup
        )));
    }
    if problem.x0().iter().any(|v| v.abs() > valid_radius) {
        return Err(Error::OutOfDomain {
            point: to_f64_vec(problem.x0()),
        });
    }
    let fd_step = solution.spacing();
    Ok(ZvonkinTransform {
        solution: Arc::new(solution),
        problem: problem.clone(),
        valid_radius,
        newton_tol: T::tol(1e-12, 64.0),
        fd_step,
    })
}

impl<T: Real> ZvonkinTransform<T> {
    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.problem.noise_dim()
    }

    pub fn lambda(&self) -> T {
        self.solution.lambda
    }

    pub fn c_lambda(&self) -> T {
        self.solution.c_lambda
    }

    pub fn solution(&self) -> &ResolventSolution<T> {
        &self.solution
    }

    pub fn problem(&self) -> &SdeProblem<T> {
        &self.problem
    }

    /// Half-width of the box on which every evaluator is trusted.
    pub fn valid_radius(&self) -> T {
        self.valid_radius
    }

    /// Step of the centered differences for `Db̃`, `Dσ̃` (the grid spacing).
    pub fn fd_step(&self) -> T {
        self.fd_step
    }

    pub fn in_valid_box(&self, x: &[T]) -> bool {
        let r = self.valid_radius * (T::one() + T::lit(1e-12));
        x.iter().all(|v| v.abs() <= r)
    }

    fn eval_psi(&self, x: &[T], psi: &mut [T], dpsi: &mut [T]) -> Result<()> {
        self.solution.psi.eval_with_gradient(x, psi, dpsi)
    }

    /// `φ_λ(x) = x + ψ_λ(x)`.
    pub fn phi(&self, x: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        let (mut psi, mut dpsi) = ([T::zero(); MAX_DIM], [T::zero(); MAX_DIM * MAX_DIM]);
        self.eval_psi(x, &mut psi[..d], &mut dpsi[..d * d])?;
        Ok((0..d).map(|i| x[i] + psi[i]).collect())
    }

    /// `Dφ_λ(x) = I + Dψ_λ(x)`, row-major.
    pub fn dphi(&self, x: &[T]) -> Result<Vec<T>> {
        let d = self.dim();
        let (mut psi, mut dpsi) = ([T::zero(); MAX_DIM], [T::zero(); MAX_DIM * MAX_DIM]);
        self.eval_psi(x, &mut psi[..d], &mut dpsi[..d * d])?;
        let mut m = dpsi[..d * d].to_vec();
        for i in 0..d {
            m[i * d + i] += T::one();
        }
        Ok(m)
    }

    /// Newton inverse with initial guess `y` and the default tolerance.
    pub fn invert_phi(&self, y: &[T]) -> Result<Vec<T>> {
        self.invert_phi_tol(y, self.newton_tol)
    }

    /// Newton inverse `x ← x − Dφ(x)⁻¹(φ(x) − y)`, `x₀ = y`, stopping when
    /// `|φ(x) − y| ≤ tol`.
    pub fn invert_phi_tol(&self, y: &[T], tol: T) -> Result<Vec<T>> {
        let d = self.dim();
        let pb = self.newton(y, y, tol)?;
        Ok(pb.x[..d].to_vec())
    }

    /// `φ_λ⁻¹(y)` with `ψ_λ`, `Dψ_λ` evaluated there.
    pub fn pullback(&self, y: &[T]) -> Result<Pullback<T>> {
        self.newton(y, y, self.newton_tol)
    }

    /// As [`pullback`](Self::pullback) with a caller-supplied initial guess.
    pub fn pullback_from(&self, y: &[T], guess: &[T]) -> Result<Pullback<T>> {
        self.newton(y, guess, self.newton_tol)
    }

    fn newton(&self, y: &[T], guess: &[T], tol: T) -> Result<Pullback<T>> {
        let d = self.dim();
        debug_assert_eq!(y.len(), d);
        let mut pb = Pullback {
            x: [T::zero(); MAX_DIM],
            psi: [T::zero(); MAX_DIM],
            dpsi: [T::zero(); MAX_DIM * MAX_DIM],
        };
        pb.x[..d].copy_from_slice(guess);
        let mut r = [T::zero(); MAX_DIM];
        let mut jac = [T::zero(); MAX_DIM * MAX_DIM];
        for _ in 0..=MAX_NEWTON_ITERATIONS {
            self.eval_psi(&pb.x[..d], &mut pb.psi[..d], &mut pb.dpsi[..d * d])
                .map_err(|_| Error::OutOfDomain { point: to_f64_vec(y) })?;
            for i in 0..d {
                r[i] = pb.x[i] + pb.psi[i] - y[i];
            }
            if linalg::norm(&r[..d]) <= tol {
                if !self.in_valid_box(&pb.x[..d]) {
                    return Err(Error::OutOfDomain { point: to_f64_vec(y) });
                }
                return Ok(pb);
            }
            jac[..d * d].copy_from_slice(&pb.dpsi[..d * d]);
            for i in 0..d {
                jac[i * d + i] += T::one();
            }
            if !linalg::solve_in_place(&jac[..d * d], d, &mut r[..d]) {
                break;
            }
            for i in 0..d {
                pb.x[i] -= r[i];
            }
        }
        Err(Error::NewtonNonConvergence { point: to_f64_vec(y) })
    }

    /// `b̃(y)` and `σ̃(y)` (row-major `d×k`) from a pullback.
    pub fn coefficients_at(&self, pb: &Pullback<T>, drift: &mut [T], diffusion: &mut [T]) {
        let d = self.dim();
        let k = self.noise_dim();
        let lambda = self.lambda();
        for i in 0..d {
            drift[i] = lambda * pb.psi[i];
        }
        let mut sig = [T::zero(); MAX_DIM * MAX_DIM];
        self.problem.diffusion().eval_into(&pb.x[..d], &mut sig[..d * k]);
        for i in 0..d {
            for l in 0..k {
                let mut s = sig[i * k + l];
                for j in 0..d {
                    s += pb.dpsi[i * d + j] * sig[j * k + l];
                }
                diffusion[i * k + l] = s;
            }
        }
    }

    /// `b̃(y) = λψ_λ(φ_λ⁻¹(y))`.
    pub fn btilde(&self, y: &[T]) -> Result<Vec<T>> {
        let pb = self.pullback(y)?;
        Ok((0..self.dim()).map(|i| self.lambda() * pb.psi[i]).collect())
    }

    /// `σ̃(y) = Dφ_λ(φ_λ⁻¹(y)) σ(φ_λ⁻¹(y))`, row-major `d×k`.
    pub fn sigmatilde(&self, y: &[T]) -> Result<Vec<T>> {
        let pb = self.pullback(y)?;
        let (d, k) = (self.dim(), self.noise_dim());
        let mut drift = [T::zero(); MAX_DIM];
        let mut diff = vec![T::zero(); d * k];
        self.coefficients_at(&pb, &mut drift[..d], &mut diff);
        Ok(diff)
    }

    /// `B(y) = σ̃σ̃*(y)`.
    pub fn diffusion_matrix(&self, y: &[T]) -> Result<Vec<T>> {
        let (d, k) = (self.dim(), self.noise_dim());
        let s = self.sigmatilde(y)?;
        let mut b = vec![T::zero(); d * d];
        linalg::outer_self(&s, d, k, &mut b);
        Ok(b)
    }

    /// `D(φ_λ⁻¹)(y) = Dφ_λ(φ_λ⁻¹(y))⁻¹` by the inverse-function theorem.
    pub fn dphi_inverse(&self, y: &[T]) -> Result<Vec<T>> {
        let pb = self.pullback(y)?;
        self.dphi_inverse_at(&pb)
    }

    pub fn dphi_inverse_at(&self, pb: &Pullback<T>) -> Result<Vec<T>> {
        let d = self.dim();
        let mut m = pb.dpsi[..d * d].to_vec();
        for i in 0..d {
            m[i * d + i] += T::one();
        }
        linalg::inverse(&m, d).ok_or_else(|| Error::Unsupported("singular Dφ".into()))
    }

    /// Centered differences of `b̃` and `σ̃` at `y` with step [`fd_step`](Self::fd_step).
    pub fn coefficient_jacobians(&self, y: &[T], pb: &Pullback<T>) -> Result<CoefficientJacobians<T>> {
        let (d, k) = (self.dim(), self.noise_dim());
        let h = self.fd_step;
        let two_h = T::lit(2.0) * h;
        let mut out = CoefficientJacobians {
            db: [T::zero(); MAX_DIM * MAX_DIM],
            dsigma: [T::zero(); MAX_DIM * MAX_DIM * MAX_DIM],
        };
        let mut probe = [T::zero(); MAX_DIM];
        let mut bp = [T::zero(); MAX_DIM];
        let mut bm = [T::zero(); MAX_DIM];
        let mut sp = [T::zero(); MAX_DIM * MAX_DIM];
        let mut sm = [T::zero(); MAX_DIM * MAX_DIM];
        for j in 0..d {
            probe[..d].copy_from_slice(y);
            probe[j] = y[j] + h;
            let plus = self.pullback_from(&probe[..d], &pb.x[..d])?;
            self.coefficients_at(&plus, &mut bp[..d], &mut sp[..d * k]);
            probe[j] = y[j] - h;
            let minus = self.pullback_from(&probe[..d], &pb.x[..d])?;
            self.coefficients_at(&minus, &mut bm[..d], &mut sm[..d * k]);
            for i in 0..d {
                out.db[i * d + j] = (bp[i] - bm[i]) / two_h;
                for l in 0..k {
                    out.dsigma[l * d * d + i * d + j] = (sp[i * k + l] - sm[i * k + l]) / two_h;
                }
            }
        }
        Ok(out)
    }

    pub fn summary(&self) -> TransformSummary {
        TransformSummary {
            lambda: self.lambda().as_f64(),
            c_lambda: self.c_lambda().as_f64(),
            valid_radius: self.valid_radius.as_f64(),
            fd_step: self.fd_step.as_f64(),
            newton_tolerance: self.newton_tol.as_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformSummary {
    pub lambda: f64,
    pub c_lambda: f64,
    pub valid_radius: f64,
    pub fd_step: f64,
    pub newton_tolerance: f64,
}

/// Grid audit of the diffeomorphism properties of `φ_λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffeoReport {
    pub sup_dphi: f64,
    pub min_det_dphi: f64,
    pub sup_dphi_inv: f64,
    pub sup_d2phi_inv: f64,
    /// Min over the grid of the smallest singular value of `Dφ_λ`.
    pub lower_bound_dphi: f64,
    /// `1 − c(λ) − ε_grid`.
    pub lower_bound_required: f64,
    /// Sup of `|φ⁻¹(φ(x)) − x|`.
    pub roundtrip_max: f64,
    /// Sup of `|φ(φ⁻¹(y)) − y|` at `y = φ(x)`.
    pub forward_roundtrip_max: f64,
    /// Sup of `‖D(φ⁻¹)(φ(x))·Dφ(x) − I‖`.
    pub inverse_identity_max: f64,
    /// Sup of `‖FD Jacobian of φ − Dφ‖`.
    pub derivative_coherence_max: f64,
    pub n_points: usize,
    pub accepted: bool,
}

/// Slack between the grid bound `1 − c(λ)` and the off-grid minimum of `|Dφ|`.
pub const DIFFEO_GRID_EPS: f64 = 1e-3;
pub const ROUNDTRIP_TOL: f64 = 1e-10;

pub fn verify_diffeo<T: Real>(t: &ZvonkinTransform<T>, grid: &[Vec<T>], fd_step: T) -> Result<DiffeoReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty verification grid".into()));
    }
    let d = t.dim();
    let two_h = T::lit(2.0) * fd_step;
    let mut sup_dphi = T::zero();
    let mut min_det = T::infinity();
    let mut sup_inv = T::zero();
    let mut sup_d2inv = T::zero();
    let mut lower = T::infinity();
    let mut rt = T::zero();
    let mut rt_fwd = T::zero();
    let mut ident = T::zero();
    let mut coherence = T::zero();
    let eye = linalg::identity::<T>(d);
    let mut prod = vec![T::zero(); d * d];
    for x in grid {
        if x.len() != d {
            return Err(Error::DimensionMismatch("grid point".into()));
        }
        if !t.in_valid_box(x) {
            return Err(Error::OutOfDomain { point: to_f64_vec(x) });
        }
        let jac = t.dphi(x)?;
        let (hi, lo) = linalg::singular_extremes(&jac, d);
        sup_dphi = sup_dphi.max(hi);
        lower = lower.min(lo);
        min_det = min_det.min(linalg::det(&jac, d));
        let jac_inv = linalg::inverse(&jac, d).ok_or_else(|| Error::Unsupported("singular Dφ on grid".into()))?;
        sup_inv = sup_inv.max(linalg::op_norm(&jac_inv, d));

        let y = t.phi(x)?;
        let pb = t.pullback(&y)?;
        let back = &pb.x[..d];
        rt = rt.max(linalg::norm(
            &back.iter().zip(x).map(|(a, b)| *a - *b).collect::<Vec<_>>(),
        ));
        let fwd = t.phi(back)?;
        rt_fwd = rt_fwd.max(linalg::norm(
            &fwd.iter().zip(&y).map(|(a, b)| *a - *b).collect::<Vec<_>>(),
        ));
        let dinv = t.dphi_inverse_at(&pb)?;
        linalg::matmul(&dinv, &jac, d, d, d, &mut prod);
        ident = ident.max(linalg::max_abs(
            &prod.iter().zip(&eye).map(|(a, b)| *a - *b).collect::<Vec<_>>(),
        ));

        let mut probe = x.clone();
        let mut yprobe = y.clone();
        for j in 0..d {
            probe[j] = x[j] + fd_step;
            let fp = t.phi(&probe)?;
            probe[j] = x[j] - fd_step;
            let fm = t.phi(&probe)?;
            probe[j] = x[j];
            for i in 0..d {
                coherence = coherence.max(((fp[i] - fm[i]) / two_h - jac[i * d + j]).abs());
            }
            yprobe[j] = y[j] + fd_step;
            let ip = t.dphi_inverse(&yprobe)?;
            yprobe[j] = y[j] - fd_step;
            let im = t.dphi_inverse(&yprobe)?;
            yprobe[j] = y[j];
            for e in 0..d * d {
                sup_d2inv = sup_d2inv.max(((ip[e] - im[e]) / two_h).abs());
            }
        }
    }
    let required = T::one() - t.c_lambda() - T::lit(DIFFEO_GRID_EPS);
    let rt_tol = T::tol(ROUNDTRIP_TOL, 1e4);
    let accepted = min_det > T::zero() && lower >= required && rt <= rt_tol;
    Ok(DiffeoReport {
        sup_dphi: sup_dphi.as_f64(),
        min_det_dphi: min_det.as_f64(),
        sup_dphi_inv: sup_inv.as_f64(),
        sup_d2phi_inv: sup_d2inv.as_f64(),
        lower_bound_dphi: lower.as_f64(),
        lower_bound_required: required.as_f64(),
        roundtrip_max: rt.as_f64(),
        forward_roundtrip_max: rt_fwd.as_f64(),
        inverse_identity_max: ident.as_f64(),
        derivative_coherence_max: coherence.as_f64(),
        n_points: grid.len(),
        accepted,
    })
}

/// Spectral bounds of `B = σ̃σ̃*` over a grid of `y` points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub c_min: f64,
    pub c_max: f64,
    pub max_asymmetry: f64,
    pub n_points: usize,
    pub accepted: bool,
}

pub fn verify_ellipticity<T: Real>(t: &ZvonkinTransform<T>, grid: &[Vec<T>]) -> Result<EllipticityReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty verification grid".into()));
    }
    let d = t.dim();
    let mut c_min = T::infinity();
    let mut c_max = T::zero();
    let mut asym = T::zero();
    for y in grid {
        let b = t.diffusion_matrix(y)?;
        let scale = linalg::max_abs(&b).max(T::one());
        for i in 0..d {
            for j in 0..i {
                asym = asym.max((b[i * d + j] - b[j * d + i]).abs());
            }
        }
        if asym > T::lit(1e3) * T::epsilon() * scale {
            return Err(Error::InvalidInput(format!(
                "B(y) not symmetric at {:?} (asymmetry {asym})",
                to_f64_vec(y)
            )));
        }
        let eig = linalg::sym_eigenvalues(&b, d);
        c_min = c_min.min(eig[0]);
        c_max = c_max.max(eig[d - 1]);
    }
    Ok(EllipticityReport {
        c_min: c_min.as_f64(),
        c_max: c_max.as_f64(),
        max_asymmetry: asym.as_f64(),
        n_points: grid.len(),
        accepted: c_min > T::zero() && c_max.is_finite(),
    })
}

/// Sup norms of the finite-difference derivatives of `b̃` and `σ̃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSmoothness {
    pub sup_dbtilde: f64,
    pub sup_dsigmatilde: f64,
    pub finite: bool,
}

/// Every `y ± fd_step` probe must pull back into the valid box.
pub fn coefficient_smoothness<T: Real>(t: &ZvonkinTransform<T>, ygrid: &[Vec<T>]) -> Result<CoefficientSmoothness> {
    let (d, k) = (t.dim(), t.noise_dim());
    let (mut sb, mut ss) = (T::zero(), T::zero());
    for y in ygrid {
        let pb = t.pullback(y)?;
        let cj = t.coefficient_jacobians(y, &pb)?;
        sb = sb.max(linalg::max_abs(&cj.db[..d * d]));
        ss = ss.max(linalg::max_abs(&cj.dsigma[..k * d * d]));
    }
    Ok(CoefficientSmoothness {
        sup_dbtilde: sb.as_f64(),
        sup_dsigmatilde: ss.as_f64(),
        finite: sb.is_finite() && ss.is_finite(),
    })
}

/// The images `φ(x)` of a grid of `x` points.
pub fn image_grid<T: Real>(t: &ZvonkinTransform<T>, xgrid: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    xgrid.iter().map(|x| t.phi(x)).collect()
}
