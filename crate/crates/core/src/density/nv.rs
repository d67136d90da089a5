use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flowsim::{
    coefficient_jacobian_path, euler_maruyama, invert_jacobians, jacobian_variational_from, path_rng,
    terminal_malliavin_x, trapezoid_weights, BrownianGrid,
};
use crate::transform::ZvonkinTransform;
use crate::{Error, Real, Result};

use super::{interpolate, silverman_bandwidth, sorted};

/// Stream offset separating auxiliary Mehler draws from the base paths.
const MEHLER_SEED_SALT: u64 = 0x6d65_686c_6572_0001;
const KERNEL_CUTOFF: f64 = 8.0;

/// A scalar functional `F` of one-dimensional Brownian increments together
/// with its Malliavin derivative `D_{r_j} F` on the grid nodes `j = 0..=n`.
pub trait WienerFunctional<T: Real>: Sync {
    fn n_steps(&self) -> usize;
    fn dt(&self) -> T;
    /// `None` when the path leaves the domain of the functional.
    fn evaluate(&self, bg: &BrownianGrid<T>) -> Result<Option<(T, Vec<T>)>>;
}

/// `F = B_T`, with `D_r F = 1`.
#[derive(Debug, Clone, Copy)]
pub struct BrownianTerminal<T> {
    pub n_steps: usize,
    pub dt: T,
}

impl<T: Real> WienerFunctional<T> for BrownianTerminal<T> {
    fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn evaluate(&self, bg: &BrownianGrid<T>) -> Result<Option<(T, Vec<T>)>> {
        Ok(Some((bg.terminal()[0], vec![T::one(); self.n_steps + 1])))
    }
}

/// `F = X_T = φ_λ⁻¹(Y_T)` for `d = k = 1`, with `D_r X_T` by the chain rule.
#[derive(Debug, Clone)]
pub struct TransformedTerminal<'a, T> {
    pub transform: &'a ZvonkinTransform<T>,
    pub n_steps: usize,
    pub dt: T,
}

impl<T: Real> WienerFunctional<T> for TransformedTerminal<'_, T> {
    fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn evaluate(&self, bg: &BrownianGrid<T>) -> Result<Option<(T, Vec<T>)>> {
        let t = self.transform;
        if t.dim() != 1 || t.noise_dim() != 1 {
            return Err(Error::Unsupported(
                "transformed terminal functional needs d = k = 1".into(),
            ));
        }
        let x0 = t.problem().x0();
        let y = euler_maruyama(t, &t.phi(x0)?, x0, bg)?;
        if y.escaped() {
            return Ok(None);
        }
        let (pbs, derivs) = match coefficient_jacobian_path(t, &y) {
            Ok(v) => v,
            Err(Error::OutOfDomain { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let jy = jacobian_variational_from(&derivs, bg, 1);
        let jy_inv = invert_jacobians(&jy)?;
        let row = terminal_malliavin_x(t, &pbs, &jy, &jy_inv)?;
        Ok(Some((pbs[pbs.len() - 1].x[0], row)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NVEstimate {
    /// Evaluation points of the centered variable `F − E F`.
    pub z_grid: Vec<f64>,
    pub g_values: Vec<f64>,
    /// `ρ_F(z + mean_shift)`.
    pub density_values: Vec<f64>,
    pub mean_shift: f64,
    pub abs_mean: f64,
    pub bandwidth: f64,
    pub n_samples: usize,
    pub n_escaped: usize,
    pub n_mehler: usize,
}

impl NVEstimate {
    /// Points `z + E F` at which `density_values` are given.
    pub fn density_grid(&self) -> Vec<f64> {
        self.z_grid.iter().map(|z| z + self.mean_shift).collect()
    }

    pub fn peak(&self) -> f64 {
        self.density_values.iter().fold(0.0, |a, &v| a.max(v))
    }
}

/// Per-sample `(F, ⟨DF, −DL⁻¹F⟩)` with `−DL⁻¹F` from the Mehler mixture
/// `e^{-u}W + √(1 − e^{-2u})W'`, `u ~ Exp(1)`, averaged over `n_mehler` draws.
fn pairing<T: Real, F: WienerFunctional<T> + ?Sized>(
    f: &F,
    seed: u64,
    index: u64,
    n_mehler: usize,
) -> Result<Option<(f64, f64)>> {
    let (n, dt) = (f.n_steps(), f.dt());
    let base = BrownianGrid::generate(seed, index, n, dt, 1);
    let Some((value, df)) = f.evaluate(&base)? else {
        return Ok(None);
    };
    let mut rng = path_rng(seed ^ MEHLER_SEED_SALT, index);
    let sd = dt.sqrt();
    let mut acc = vec![T::zero(); n + 1];
    let mut used = 0usize;
    let mut mixed = vec![T::zero(); n];
    for _ in 0..n_mehler {
        let u: f64 = Exp1.sample(&mut rng);
        let a = T::lit((-u).exp());
        let b = T::lit((1.0 - (-2.0 * u).exp()).max(0.0).sqrt());
        for (m, &w) in mixed.iter_mut().zip(base.increments()) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *m = a * w + b * T::lit(z) * sd;
        }
        let grid = BrownianGrid::from_increments(dt, 1, mixed.clone())?;
        if let Some((_, dmix)) = f.evaluate(&grid)? {
            for (s, v) in acc.iter_mut().zip(&dmix) {
                *s += *v;
            }
            used += 1;
        }
    }
    if used == 0 {
        return Ok(None);
    }
    let inv = T::one() / T::from_usize(used).unwrap();
    let w = trapezoid_weights(n + 1, dt);
    let p: T = (0..=n).map(|j| w[j] * df[j] * acc[j] * inv).sum();
    Ok(Some((value.as_f64(), p.as_f64())))
}

/// Density of `F` from `ρ(z + E F) = E|F̄| / (2g(z)) · exp(−∫_0^z u/g(u) du)`
/// with `g(z) = E[⟨DF̄, −DL⁻¹F̄⟩ | F̄ = z]` estimated by Nadaraya–Watson
/// regression (Silverman bandwidth) over `n_samples` paths keyed by `(seed, i)`.
/// `z_grid` is in centered coordinates, increasing, and must bracket 0.
pub fn nourdin_viens_density<T: Real, F: WienerFunctional<T> + ?Sized>(
    f: &F,
    n_samples: usize,
    n_mehler: usize,
    z_grid: &[f64],
    seed: u64,
) -> Result<NVEstimate> {
    if n_samples < 2 || n_mehler == 0 {
        return Err(Error::InsufficientSample {
            got: n_samples.min(n_mehler),
            need: 2,
        });
    }
    if z_grid.len() < 2
        || z_grid.windows(2).any(|w| !(w[1] > w[0]))
        || !(z_grid[0] <= 0.0 && 0.0 <= z_grid[z_grid.len() - 1])
    {
        return Err(Error::InvalidInput("z grid must be increasing and bracket 0".into()));
    }
    let pairs: Vec<Option<(f64, f64)>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| pairing(f, seed, i, n_mehler))
        .collect::<Result<_>>()?;
    let ok: Vec<(f64, f64)> = pairs.iter().flatten().copied().collect();
    let n = ok.len();
    if n < 2 {
        return Err(Error::InsufficientSample { got: n, need: 2 });
    }
    let mean = ok.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let centered: Vec<f64> = ok.iter().map(|p| p.0 - mean).collect();
    let abs_mean = centered.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
    let h = silverman_bandwidth(&centered)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| centered[a].partial_cmp(&centered[b]).expect("finite"));
    let xs: Vec<f64> = order.iter().map(|&i| centered[i]).collect();
    let ps: Vec<f64> = order.iter().map(|&i| ok[i].1).collect();
    debug_assert!(sorted(&xs) == xs);
    let (lo_s, hi_s) = (xs[0], xs[n - 1]);
    let cut = KERNEL_CUTOFF * h;

    let mut g = Vec::with_capacity(z_grid.len());
    for &z in z_grid {
        let lo = xs.partition_point(|&v| v < z - cut);
        let hi = xs.partition_point(|&v| v <= z + cut);
        let (mut num, mut den) = (0.0, 0.0);
        for i in lo..hi {
            let u = (z - xs[i]) / h;
            let k = (-0.5 * u * u).exp();
            num += k * ps[i];
            den += k;
        }
        g.push(if den > 0.0 { num / den } else { f64::NAN });
    }
    for (&z, &gv) in z_grid.iter().zip(&g) {
        if z > lo_s && z < hi_s && !(gv > 0.0) {
            return Err(Error::DegenerateConditionalVariance { z });
        }
    }
    // Outside the sample range the regression is extended by its nearest value.
    let first = g
        .iter()
        .position(|v| v.is_finite())
        .ok_or(Error::DegenerateConditionalVariance { z: 0.0 })?;
    let last = g.iter().rposition(|v| v.is_finite()).unwrap();
    for i in 0..first {
        g[i] = g[first];
    }
    for i in last + 1..g.len() {
        g[i] = g[last];
    }

    let integrand: Vec<f64> = z_grid
        .iter()
        .zip(&g)
        .map(|(&z, &gv)| if gv > 0.0 { z / gv } else { 0.0 })
        .collect();
    let mut cum = vec![0.0; z_grid.len()];
    for i in 1..z_grid.len() {
        cum[i] = cum[i - 1] + 0.5 * (z_grid[i] - z_grid[i - 1]) * (integrand[i] + integrand[i - 1]);
    }
    let at_zero = interpolate(z_grid, &cum, 0.0);
    let density: Vec<f64> = g
        .iter()
        .zip(&cum)
        .map(|(&gv, &c)| {
            if gv > 0.0 {
                abs_mean / (2.0 * gv) * (-(c - at_zero)).exp()
            } else {
                0.0
            }
        })
        .collect();

    Ok(NVEstimate {
        z_grid: z_grid.to_vec(),
        g_values: g,
        density_values: density,
        mean_shift: mean,
        abs_mean,
        bandwidth: h,
        n_samples,
        n_escaped: n_samples - n,
        n_mehler,
    })
}
