//! SDE problems, the built-in coefficient catalog and numerical audits of
//! the standing assumptions on the coefficients: Hölder drift with at most
//! linear growth, diffusion in `C_b³`, and `a = σσ*` uniformly invertible.
//!
//! Suprema over `R^d` are not computable; every audit runs on a bounded
//! sample grid and reports the grid it used.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::scalar::to_f64_vec;
use crate::{Error, Real, Result};

/// Default half-width `R` of the working box `[-R, R]^d`.
pub const DEFAULT_RADIUS: f64 = 10.0;

/// Default grid spacing for a state dimension.
pub fn default_spacing(dim: usize) -> f64 {
    if dim == 1 {
        0.01
    } else {
        0.05
    }
}

type FieldFn<T> = dyn Fn(&[T], &mut [T]) + Send + Sync;

/// A coefficient field `R^d → R^{rows × cols}` (row-major output).
#[derive(Clone)]
pub struct VectorField<T> {
    dim_in: usize,
    rows: usize,
    cols: usize,
    label: String,
    eval: Arc<FieldFn<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new<F>(dim_in: usize, rows: usize, cols: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[T], &mut [T]) + Send + Sync + 'static,
    {
        assert!(dim_in > 0 && rows > 0 && cols > 0, "field dimensions must be positive");
        Self {
            dim_in,
            rows,
            cols,
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    /// Drift-shaped field (`d → d`) applying `f` to every coordinate.
    pub fn componentwise<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self::new(dim, dim, 1, label, move |x, out| {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = f(xi);
            }
        })
    }

    /// Diagonal diffusion (`d → d×d`) with entry `f(x_i)` on the diagonal.
    pub fn diagonal<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(T) -> T + Send + Sync + 'static,
    {
        Self::new(dim, dim, dim, label, move |x, out| {
            out.iter_mut().for_each(|o| *o = T::zero());
            for (i, &xi) in x.iter().enumerate() {
                out[i * dim + i] = f(xi);
            }
        })
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    /// `(rows, cols)` of the output.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn out_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.dim_in);
        debug_assert_eq!(out.len(), self.out_len());
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.out_len()];
        self.eval_into(x, &mut out);
        out
    }
}

impl<T> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.label)
            .field("dim_in", &self.dim_in)
            .field("shape", &(self.rows, self.cols))
            .finish()
    }
}

/// `dX = b(X) dt + σ(X) dB` on `[0, T]`, `X_0 = x0`, with `b` θ-Hölder.
#[derive(Debug, Clone)]
pub struct SdeProblem<T> {
    d: usize,
    k: usize,
    drift: VectorField<T>,
    diffusion: VectorField<T>,
    x0: Vec<T>,
    horizon: T,
    theta: T,
}

impl<T: Real> SdeProblem<T> {
    pub fn new(drift: VectorField<T>, diffusion: VectorField<T>, x0: Vec<T>, horizon: T, theta: T) -> Result<Self> {
        let d = drift.dim_in();
        let (dr, dc) = drift.shape();
        let (sr, k) = diffusion.shape();
        if dr != d || dc != 1 {
            return Err(Error::DimensionMismatch(format!(
                "drift must map R^{d} to R^{d}, got {dr}x{dc}"
            )));
        }
        if diffusion.dim_in() != d || sr != d {
            return Err(Error::DimensionMismatch(format!(
                "diffusion must map R^{d} to R^{d}x{k}, got input {} and {sr} rows",
                diffusion.dim_in()
            )));
        }
        if x0.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "x0 has {} entries, expected {d}",
                x0.len()
            )));
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        if !(theta > T::zero() && theta < T::one()) {
            return Err(Error::InvalidInput(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(Self {
            d,
            k,
            drift,
            diffusion,
            x0,
            horizon,
            theta,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_dim(&self) -> usize {
        self.k
    }

    pub fn drift(&self) -> &VectorField<T> {
        &self.drift
    }

    pub fn diffusion(&self) -> &VectorField<T> {
        &self.diffusion
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn with_x0(mut self, x0: Vec<T>) -> Result<Self> {
        if x0.len() != self.d {
            return Err(Error::DimensionMismatch("x0 length".into()));
        }
        self.x0 = x0;
        Ok(self)
    }

    /// `a(x) = σ(x)σ(x)*`, row-major `d×d`.
    pub fn diffusion_matrix(&self, x: &[T], sigma_buf: &mut [T], a: &mut [T]) {
        self.diffusion.eval_into(x, sigma_buf);
        linalg::outer_self(sigma_buf, self.d, self.k, a);
    }
}

// ---------------------------------------------------------------------------
// Catalog

/// Drift entries of the coefficient catalog, applied coordinate-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `b(x) = βx`.
    Linear {
        beta: f64,
    },
    /// `b(x) = scale·|x|^{1/2}`.
    SqrtAbs {
        scale: f64,
    },
    /// `b(x) = scale·|x|^exponent`, exponent in (0, 1].
    PowerAbs {
        scale: f64,
        exponent: f64,
    },
}

/// Diagonal diffusion entries of the catalog (`k = d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Constant {
        value: f64,
    },
    /// `σ(x) = base + amp·sin x`.
    Sinusoidal {
        base: f64,
        amp: f64,
    },
    /// `σ(x) = coef·x`; degenerate at the origin.
    Linear {
        coef: f64,
    },
}

impl DriftSpec {
    pub fn build<T: Real>(&self, dim: usize) -> Result<VectorField<T>> {
        Ok(match *self {
            DriftSpec::Zero => VectorField::componentwise(dim, "zero", |_| T::zero()),
            DriftSpec::Constant { value } => {
                let v = T::lit(value);
                VectorField::componentwise(dim, format!("constant({value})"), move |_| v)
            }
            DriftSpec::Linear { beta } => {
                let b = T::lit(beta);
                VectorField::componentwise(dim, format!("linear(beta={beta})"), move |x| b * x)
            }
            DriftSpec::SqrtAbs { scale } => {
                let s = T::lit(scale);
                VectorField::componentwise(dim, format!("sqrt_abs(scale={scale})"), move |x: T| s * x.abs().sqrt())
            }
            DriftSpec::PowerAbs { scale, exponent } => {
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "power_abs exponent must lie in (0, 1], got {exponent}"
                    )));
                }
                let (s, e) = (T::lit(scale), T::lit(exponent));
                VectorField::componentwise(
                    dim,
                    format!("power_abs(scale={scale}, exponent={exponent})"),
                    move |x: T| s * x.abs().powf(e),
                )
            }
        })
    }
}

impl DiffusionSpec {
    pub fn build<T: Real>(&self, dim: usize) -> Result<VectorField<T>> {
        Ok(match *self {
            DiffusionSpec::Constant { value } => {
                let v = T::lit(value);
                VectorField::diagonal(dim, format!("constant({value})"), move |_| v)
            }
            DiffusionSpec::Sinusoidal { base, amp } => {
                let (b, a) = (T::lit(base), T::lit(amp));
                VectorField::diagonal(dim, format!("sinusoidal(base={base}, amp={amp})"), move |x: T| {
                    b + a * x.sin()
                })
            }
            DiffusionSpec::Linear { coef } => {
                let c = T::lit(coef);
                VectorField::diagonal(dim, format!("linear(coef={coef})"), move |x| c * x)
            }
        })
    }
}

/// File-level description of a problem: dimensions, initial point, horizon,
/// Hölder exponent and catalog coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub theta: f64,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
}

impl ProblemSpec {
    pub fn build<T: Real>(&self) -> Result<SdeProblem<T>> {
        if self.dim == 0 {
            return Err(Error::InvalidInput("dim must be positive".into()));
        }
        SdeProblem::new(
            self.drift.build(self.dim)?,
            self.diffusion.build(self.dim)?,
            self.x0.iter().map(|&v| T::lit(v)).collect(),
            T::lit(self.horizon),
            T::lit(self.theta),
        )
    }
}

// ---------------------------------------------------------------------------
// Sample grids

/// Points `lo, lo + h, …` up to `hi` (inclusive within rounding).
pub fn uniform_points<T: Real>(lo: T, hi: T, spacing: T) -> Vec<T> {
    assert!(spacing > T::zero() && hi >= lo);
    let n = ((hi - lo) / spacing + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    (0..=n).map(|i| lo + spacing * T::from_usize(i).unwrap()).collect()
}

/// Tensor grid on `[lo, hi]^dim` as a list of points.
pub fn box_grid<T: Real>(dim: usize, lo: T, hi: T, spacing: T) -> Vec<Vec<T>> {
    let axis = uniform_points(lo, hi, spacing);
    let mut pts: Vec<Vec<T>> = vec![Vec::with_capacity(dim)];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(pts.len() * axis.len());
        for p in &pts {
            for &a in &axis {
                let mut q = p.clone();
                q.push(a);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Bounding box and size of a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDescription {
    pub n_points: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GridDescription {
    pub fn of<T: Real>(grid: &[Vec<T>]) -> Self {
        let d = grid.first().map_or(0, Vec::len);
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for p in grid {
            for (i, v) in p.iter().enumerate() {
                lower[i] = lower[i].min(v.as_f64());
                upper[i] = upper[i].max(v.as_f64());
            }
        }
        Self {
            n_points: grid.len(),
            lower,
            upper,
        }
    }
}

// ---------------------------------------------------------------------------
// Hölder audit

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub theta: f64,
    /// Sup of `|f(x) − f(y)| / |x − y|^θ` over grid pairs with `|x − y| ≤ 1`.
    pub seminorm_estimate: f64,
    /// Sup of `|f(x)| / (1 + |x|)`.
    pub weighted_sup: f64,
    /// Pair attaining the seminorm estimate.
    pub argmax_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub sample_grid: GridDescription,
}

/// Estimates the local θ-Hölder seminorm and the linear-growth weighted sup
/// norm of `f` on a point set.
pub fn estimate_holder_seminorm<T: Real>(f: &VectorField<T>, theta: T, grid: &[Vec<T>]) -> Result<HolderReport> {
    if grid.len() < 2 {
        return Err(Error::DegenerateGrid);
    }
    let d = f.dim_in();
    if grid.iter().any(|p| p.len() != d) {
        return Err(Error::DimensionMismatch("grid point dimension".into()));
    }
    let values: Vec<Vec<T>> = grid.iter().map(|p| f.eval(p)).collect();

    let weighted_sup = grid
        .iter()
        .zip(&values)
        .map(|(p, v)| linalg::norm(v) / (T::one() + linalg::norm(p)))
        .fold(T::zero(), T::max);

    // Window scan along the first coordinate: only pairs within distance 1
    // on that axis can be admissible.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a][0].partial_cmp(&grid[b][0]).expect("finite grid"));
    let reach = T::one() + T::lit(1e-9);
    let mut best = T::zero();
    let mut argmax = None;
    let mut admissible = false;
    let mut diff = vec![T::zero(); d];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if grid[j][0] - grid[i][0] > reach {
                break;
            }
            for (c, dc) in diff.iter_mut().enumerate() {
                *dc = grid[i][c] - grid[j][c];
            }
            let dist = linalg::norm(&diff);
            if dist > reach || dist == T::zero() {
                continue;
            }
            admissible = true;
            let num: T = values[i]
                .iter()
                .zip(&values[j])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            let q = num / dist.powf(theta);
            if q > best {
                best = q;
                argmax = Some((to_f64_vec(&grid[i]), to_f64_vec(&grid[j])));
            }
        }
    }
    if !admissible {
        return Err(Error::DegenerateGrid);
    }
    Ok(HolderReport {
        theta: theta.as_f64(),
        seminorm_estimate: best.as_f64(),
        weighted_sup: weighted_sup.as_f64(),
        argmax_pair: argmax,
        sample_grid: GridDescription::of(grid),
    })
}

// ---------------------------------------------------------------------------
// Assumption audit

/// Centered finite-difference sup norms of the axis partial derivatives of
/// σ up to order three. Truncation error is `O(h²)` for each order, so these
/// are estimates of the `C_b³` norms, not bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionSmoothness {
    pub fd_step: f64,
    pub sup_value: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
    pub sup_d3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionFlags {
    /// Drift is θ-Hölder with at most linear growth on the grid.
    pub drift_holder: bool,
    /// Diffusion and its first three derivatives bounded on the grid.
    pub diffusion_c3: bool,
    /// `a = σσ*` invertible everywhere with finite `sup ‖a⁻¹‖_HS`.
    pub diffusion_invertible: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.drift_holder && self.diffusion_c3 && self.diffusion_invertible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub holder_drift: HolderReport,
    pub diffusion_smoothness: DiffusionSmoothness,
    /// Sup over the grid of the Hilbert–Schmidt norm of `a(x)⁻¹`.
    pub inv_a_sup: f64,
    pub singular_point: Option<Vec<f64>>,
    pub pass: ConditionFlags,
}

/// Audits the three standing conditions on `grid` with derivative step `h`.
pub fn check_assumptions<T: Real>(problem: &SdeProblem<T>, grid: &[Vec<T>], fd_step: T) -> Result<AssumptionReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty assumption grid".into()));
    }
    if !(fd_step > T::zero()) {
        return Err(Error::InvalidInput("fd_step must be positive".into()));
    }
    let d = problem.dim();
    let k = problem.noise_dim();
    let holder_drift = estimate_holder_seminorm(problem.drift(), problem.theta(), grid)?;

    let sigma = problem.diffusion();
    let h = fd_step;
    let two = T::lit(2.0);
    let mut s = [T::zero(); 5].map(|_| vec![T::zero(); d * k]);
    let mut probe = vec![T::zero(); d];
    let (mut sup0, mut sup1, mut sup2, mut sup3) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut a = vec![T::zero(); d * d];
    let mut sig = vec![T::zero(); d * k];
    let mut inv_a_sup = T::zero();
    let mut singular_point = None;

    for p in grid {
        sigma.eval_into(p, &mut sig);
        sup0 = sup0.max(linalg::max_abs(&sig));
        for axis in 0..d {
            for (slot, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
                probe.copy_from_slice(p);
                probe[axis] += T::lit(*off) * h;
                sigma.eval_into(&probe, &mut s[slot]);
            }
            for e in 0..d * k {
                let (m2, m1, z, p1, p2) = (s[0][e], s[1][e], s[2][e], s[3][e], s[4][e]);
                let d1 = (p1 - m1) / (two * h);
                let d2 = (p1 - two * z + m1) / (h * h);
                let d3 = (p2 - two * p1 + two * m1 - m2) / (two * h * h * h);
                sup1 = sup1.max(d1.abs());
                sup2 = sup2.max(d2.abs());
                sup3 = sup3.max(d3.abs());
            }
        }

        linalg::outer_self(&sig, d, k, &mut a);
        match linalg::inverse(&a, d) {
            Some(inv) => inv_a_sup = inv_a_sup.max(linalg::frobenius(&inv)),
            None => {
                if singular_point.is_none() {
                    singular_point = Some(to_f64_vec(p));
                }
            }
        }
    }

    let finite = |v: T| v.is_finite();
    let pass = ConditionFlags {
        drift_holder: holder_drift.seminorm_estimate.is_finite() && holder_drift.weighted_sup.is_finite(),
        diffusion_c3: [sup0, sup1, sup2, sup3].into_iter().all(finite),
        diffusion_invertible: singular_point.is_none() && inv_a_sup.is_finite(),
    };
    Ok(AssumptionReport {
        holder_drift,
        diffusion_smoothness: DiffusionSmoothness {
            fd_step: h.as_f64(),
            sup_value: sup0.as_f64(),
            sup_d1: sup1.as_f64(),
            sup_d2: sup2.as_f64(),
            sup_d3: sup3.as_f64(),
        },
        inv_a_sup: if singular_point.is_some() {
            f64::INFINITY
        } else {
            inv_a_sup.as_f64()
        },
        singular_point,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, h: f64) -> Vec<Vec<f64>> {
        uniform_points(lo, hi, h).into_iter().map(|x| vec![x]).collect()
    }

    fn problem(drift: DriftSpec, diffusion: DiffusionSpec) -> SdeProblem<f64> {
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

    #[test]
    fn zero_field_has_zero_norms() {
        let f = DriftSpec::Zero.build::<f64>(1).unwrap();
        let r = estimate_holder_seminorm(&f, 0.3, &line(-2.0, 2.0, 0.1)).unwrap();
        assert_eq!(r.seminorm_estimate, 0.0);
        assert_eq!(r.weighted_sup, 0.0);
    }

    #[test]
    fn sqrt_seminorm_attained_at_origin_pair() {
        let f = DriftSpec::SqrtAbs { scale: 1.0 }.build::<f64>(1).unwrap();
        let r = estimate_holder_seminorm(&f, 0.5, &line(0.0, 1.0, 0.01)).unwrap();
        assert!((r.seminorm_estimate - 1.0).abs() < 1e-12, "{}", r.seminorm_estimate);
    }

    #[test]
    fn identity_seminorm_brute_force() {
        let f = DriftSpec::Linear { beta: 1.0 }.build::<f64>(1).unwrap();
        let grid = line(0.0, 1.0, 0.01);
        let r = estimate_holder_seminorm(&f, 0.5, &grid).unwrap();
        // Brute force over all pairs.
        let mut brute: f64 = 0.0;
        for a in &grid {
            for b in &grid {
                let dist = (a[0] - b[0]).abs();
                if dist > 0.0 && dist <= 1.0 + 1e-9 {
                    brute = brute.max(dist / dist.sqrt());
                }
            }
        }
        assert!((brute - 1.0).abs() < 1e-12);
        assert!((r.seminorm_estimate - brute).abs() < 1e-12);
    }

    #[test]
    fn degenerate_grids() {
        let f = DriftSpec::Zero.build::<f64>(1).unwrap();
        assert_eq!(
            estimate_holder_seminorm(&f, 0.5, &[vec![0.0]]).unwrap_err(),
            Error::DegenerateGrid
        );
        assert_eq!(
            estimate_holder_seminorm(&f, 0.5, &[vec![0.0], vec![3.0]]).unwrap_err(),
            Error::DegenerateGrid
        );
    }

    #[test]
    fn trivial_problem_passes_all_conditions() {
        let p = problem(DriftSpec::Zero, DiffusionSpec::Constant { value: 1.0 });
        let r = check_assumptions(&p, &line(-10.0, 10.0, 0.01), 1e-3).unwrap();
        assert!(r.pass.all());
        assert!((r.inv_a_sup - 1.0).abs() < 1e-15);
        assert_eq!(r.diffusion_smoothness.sup_d1, 0.0);
    }

    #[test]
    fn linear_diffusion_is_singular_at_origin() {
        let p = problem(DriftSpec::Zero, DiffusionSpec::Linear { coef: 1.0 });
        let r = check_assumptions(&p, &line(-1.0, 1.0, 0.5), 1e-3).unwrap();
        assert!(!r.pass.diffusion_invertible);
        assert_eq!(r.singular_point, Some(vec![0.0]));
    }

    #[test]
    fn rough_testbed_inverse_bound() {
        let p = problem(
            DriftSpec::SqrtAbs { scale: 1.0 },
            DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
        );
        let grid = line(-10.0, 10.0, 0.01);
        let r = check_assumptions(&p, &grid, 1e-3).unwrap();
        assert!(r.pass.all());
        let brute = grid
            .iter()
            .map(|x| 1.0 / (1.0 + 0.3 * x[0].sin()).powi(2))
            .fold(0.0, f64::max);
        assert!((r.inv_a_sup - brute).abs() < 1e-12);
        assert!((r.inv_a_sup - 1.0 / 0.49).abs() < 1e-3);
        // |cos| ≤ 1 so the derivative sup norms are bounded by 0.3.
        assert!(r.diffusion_smoothness.sup_d1 <= 0.3 + 1e-6);
        assert!(r.diffusion_smoothness.sup_d3 <= 0.3 + 1e-4);
    }

    #[test]
    fn catalog_round_trips_through_json_names() {
        let spec: DriftSpec = serde_json_like(r#"{"name":"sqrt_abs","scale":1.0}"#);
        assert_eq!(spec, DriftSpec::SqrtAbs { scale: 1.0 });
    }

    fn serde_json_like<D: serde::de::DeserializeOwned>(s: &str) -> D {
        serde_json::from_str(s).unwrap()
    }
}
