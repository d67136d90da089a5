//! Kernel density estimates of terminal laws, the two-sample
//! Kolmogorov–Smirnov test, the change-of-variables identity between the
//! densities of `X` and `Y = φ_λ(X)`, and the one-dimensional Nourdin–Viens
//! reconstruction from Malliavin derivatives.

mod nv;

use serde::{Deserialize, Serialize};

use crate::flowsim::{FunctionalG, NondegeneracySummary};
use crate::transform::ZvonkinTransform;
use crate::{Error, Real, Result};

pub use nv::{nourdin_viens_density, BrownianTerminal, NVEstimate, TransformedTerminal, WienerFunctional};

/// Fewest samples accepted by [`kde`].
pub const MIN_KDE_SAMPLES: usize = 1000;
/// Smallest grid mass accepted for a density estimate.
pub const MIN_MASS: f64 = 0.95;
/// Kernel support cut-off in bandwidths.
const KERNEL_CUTOFF: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub bandwidth: T,
    pub n_samples: usize,
    pub mass: T,
}

impl<T: Real> DensityEstimate<T> {
    /// Linear interpolation on the grid, zero outside it.
    pub fn value_at(&self, x: T) -> T {
        interpolate(&self.grid, &self.values, x)
    }

    pub fn peak(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a.max(v))
    }

    /// `sup |ρ̂ − f|` over the grid.
    pub fn sup_error(&self, f: impl Fn(T) -> T) -> T {
        self.grid
            .iter()
            .zip(&self.values)
            .fold(T::zero(), |a, (&x, &v)| a.max((v - f(x)).abs()))
    }
}

pub(crate) fn interpolate<T: Real>(grid: &[T], values: &[T], x: T) -> T {
    let n = grid.len();
    if n == 0 || x < grid[0] || x > grid[n - 1] {
        return T::zero();
    }
    let i = grid.partition_point(|&g| g <= x).clamp(1, n - 1);
    let (x0, x1) = (grid[i - 1], grid[i]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { T::zero() };
    values[i - 1] * (T::one() - w) + values[i] * w
}

/// `1.06 · std · n^{-1/5}`.
pub fn silverman_bandwidth<T: Real>(samples: &[T]) -> Result<T> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSample { got: n, need: 2 });
    }
    let m = crate::flowsim::moments(samples);
    let h = 1.06 * m.variance.sqrt() * (n as f64).powf(-0.2);
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(
            "Silverman bandwidth needs a nondegenerate sample".into(),
        ));
    }
    Ok(T::lit(h))
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn uniform_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_usize(n - 1).unwrap();
    (0..n).map(|i| lo + step * T::from_usize(i).unwrap()).collect()
}

/// Grid spanning the sample range plus four bandwidths on each side.
pub fn default_grid<T: Real>(samples: &[T], bandwidth: T, n: usize) -> Vec<T> {
    let lo = samples.iter().fold(T::infinity(), |a, &v| a.min(v));
    let hi = samples.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
    let pad = T::lit(4.0) * bandwidth;
    uniform_grid(lo - pad, hi + pad, n)
}

pub fn trapezoid<T: Real>(grid: &[T], values: &[T]) -> T {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| T::lit(0.5) * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}

/// Sorted copy of finite samples.
pub(crate) fn sorted<T: Real>(samples: &[T]) -> Vec<T> {
    let mut s: Vec<T> = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    s
}

/// Gaussian kernel estimate on `grid`; the bandwidth defaults to Silverman's rule.
pub fn kde<T: Real>(samples: &[T], grid: &[T], bandwidth: Option<T>) -> Result<DensityEstimate<T>> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::InsufficientSample {
            got: samples.len(),
            need: MIN_KDE_SAMPLES,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    let h = match bandwidth {
        Some(h) if h > T::zero() => h,
        Some(_) => return Err(Error::InvalidInput("bandwidth must be positive".into())),
        None => silverman_bandwidth(samples)?,
    };
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "density grid must be increasing with ≥ 2 points".into(),
        ));
    }
    let s = sorted(samples);
    let n = s.len();
    let cut = T::lit(KERNEL_CUTOFF) * h;
    let norm = T::one() / (T::from_usize(n).unwrap() * h * T::lit((2.0 * std::f64::consts::PI).sqrt()));
    let half = T::lit(0.5);
    let values: Vec<T> = grid
        .iter()
        .map(|&x| {
            let lo = s.partition_point(|&v| v < x - cut);
            let hi = s.partition_point(|&v| v <= x + cut);
            let acc: T = s[lo..hi]
                .iter()
                .map(|&v| {
                    let u = (x - v) / h;
                    (-half * u * u).exp()
                })
                .sum();
            acc * norm
        })
        .collect();
    let mass = trapezoid(grid, &values);
    if mass.as_f64() < MIN_MASS {
        return Err(Error::GridTooNarrow { mass: mass.as_f64() });
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth: h,
        n_samples: n,
        mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_a: usize,
    pub n_b: usize,
}

/// Two-sample Kolmogorov–Smirnov statistic with the 95% critical value
/// `1.36·√((n_a + n_b)/(n_a·n_b))`.
pub fn ks_distance<T: Real>(a: &[T], b: &[T]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientSample { got: 0, need: 1 });
    }
    let (sa, sb) = (sorted(a), sorted(b));
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = if sa[i] <= sb[j] { sa[i] } else { sb[j] };
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let (fa, fb) = (na as f64, nb as f64);
    let threshold = 1.36 * ((fa + fb) / (fa * fb)).sqrt();
    Ok(KsResult {
        statistic: d,
        threshold,
        pass: d < threshold,
        n_a: na,
        n_b: nb,
    })
}

/// `∫ |a(u) − b(u)| du` on `grid`, both estimates interpolated.
pub fn l1_distance<T: Real>(a: &DensityEstimate<T>, b: &DensityEstimate<T>, grid: &[T]) -> T {
    let diff: Vec<T> = grid.iter().map(|&u| (a.value_at(u) - b.value_at(u)).abs()).collect();
    trapezoid(grid, &diff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeOfVariablesReport {
    pub l1_discrepancy: f64,
    pub n_points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

/// `∫ |ρ̂_X(u) − det Dφ_λ(u) · ρ̂_Y(φ_λ(u))| du` for `d = 1`.
pub fn change_of_variables_check<T: Real>(
    rho_x: &DensityEstimate<T>,
    rho_y: &DensityEstimate<T>,
    t: &ZvonkinTransform<T>,
    grid: &[T],
) -> Result<ChangeOfVariablesReport> {
    if t.dim() != 1 {
        return Err(Error::Unsupported("change-of-variables check needs d = 1".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs at least two points".into()));
    }
    let mut diff = Vec::with_capacity(grid.len());
    for &u in grid {
        if !t.in_valid_box(&[u]) {
            return Err(Error::OutOfDomain {
                point: vec![u.as_f64()],
            });
        }
        let y = t.phi(&[u])?[0];
        let jac = t.dphi(&[u])?[0];
        diff.push((rho_x.value_at(u) - jac.abs() * rho_y.value_at(y)).abs());
    }
    Ok(ChangeOfVariablesReport {
        l1_discrepancy: trapezoid(grid, &diff).as_f64(),
        n_points: grid.len(),
        grid_lo: grid[0].as_f64(),
        grid_hi: grid[grid.len() - 1].as_f64(),
    })
}

/// Density of `G(t, X_t)` with the nondegeneracy certificate it rests on.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalDensity<T> {
    pub estimate: DensityEstimate<T>,
    pub certificate: NondegeneracySummary,
}

/// Kernel estimate of the law of `G(t, X_t)` from samples of `X_t`. Requires
/// a certificate with strictly positive minima and no degenerate paths.
pub fn density_of_g<T: Real>(
    g: &FunctionalG<T>,
    x_samples: &[T],
    time: T,
    grid: Option<&[T]>,
    certificate: &NondegeneracySummary,
) -> Result<FunctionalDensity<T>> {
    let positive = certificate.min_dx_norm2 > 0.0
        && certificate.min_dg_norm2.is_some_and(|v| v > 0.0)
        && certificate.degenerate_dx == 0
        && certificate.degenerate_dg == 0;
    if !positive {
        return Err(Error::InvalidInput(
            "nondegeneracy certificate is not strictly positive".into(),
        ));
    }
    g.check_lower_bound(time, x_samples.iter().copied())?;
    let values: Vec<T> = x_samples.iter().map(|&x| g.eval(time, x)).collect();
    let h = silverman_bandwidth(&values)?;
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = default_grid(&values, h, 401);
            &owned
        }
    };
    Ok(FunctionalDensity {
        estimate: kde(&values, grid, Some(h))?,
        certificate: certificate.clone(),
    })
}

/// Standard normal density scaled to mean `m` and variance `v`.
pub fn gaussian_pdf(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_zero_ks_distance() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let r = ks_distance(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn ks_handles_ties_and_disjoint_supports() {
        let r = ks_distance(&[0.0, 0.0, 1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((r.statistic - 1.0 / 3.0).abs() < 1e-15);
        let r = ks_distance(&[0.0, 1.0], &[2.0, 3.0]).unwrap();
        assert_eq!(r.statistic, 1.0);
    }

    #[test]
    fn spike_has_kernel_shape() {
        let s = vec![1.5f64; 2000];
        let grid = uniform_grid(-1.0, 4.0, 501);
        let e = kde(&s, &grid, Some(0.2)).unwrap();
        assert!(e.sup_error(|x| gaussian_pdf(x, 1.5, 0.04)) < 1e-12);
        assert!(silverman_bandwidth(&s).is_err());
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let s: Vec<f64> = (0..2000).map(|i| i as f64 / 2000.0).collect();
        let grid = uniform_grid(0.0, 0.5, 101);
        assert!(matches!(kde(&s, &grid, None), Err(Error::GridTooNarrow { .. })));
        assert!(matches!(
            kde(&s[..10], &grid, None),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn interpolation_is_zero_outside() {
        let g = [0.0, 1.0, 2.0];
        let v = [1.0, 3.0, 5.0];
        assert_eq!(interpolate(&g, &v, 0.5), 2.0);
        assert_eq!(interpolate(&g, &v, 2.0), 5.0);
        assert_eq!(interpolate(&g, &v, -0.1), 0.0);
    }
}
