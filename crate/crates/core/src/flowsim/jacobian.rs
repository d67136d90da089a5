use crate::linalg;
use crate::transform::{CoefficientJacobians, Pullback, ZvonkinTransform};
use crate::{Error, Real, Result};

use super::{BrownianGrid, SamplePath};

/// `d×d` matrices along a path, one per state.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPath<T> {
    pub d: usize,
    pub mats: Vec<T>,
}

impl<T: Real> JacobianPath<T> {
    pub fn n_states(&self) -> usize {
        self.mats.len() / (self.d * self.d)
    }

    pub fn at(&self, i: usize) -> &[T] {
        let m = self.d * self.d;
        &self.mats[i * m..(i + 1) * m]
    }
}

/// Pre-images and coefficient derivatives, one per state.
pub type PathCoefficients<T> = (Vec<Pullback<T>>, Vec<CoefficientJacobians<T>>);

/// Pre-images and coefficient derivatives at every state of a transformed path.
pub fn coefficient_jacobian_path<T: Real>(t: &ZvonkinTransform<T>, y: &SamplePath<T>) -> Result<PathCoefficients<T>> {
    let mut pbs = Vec::with_capacity(y.n_states());
    let mut derivs = Vec::with_capacity(y.n_states());
    let mut guess = t.problem().x0().to_vec();
    for i in 0..y.n_states() {
        let s = y.state(i);
        let pb = t.pullback_from(s, &guess)?;
        guess.copy_from_slice(&pb.x[..t.dim()]);
        derivs.push(t.coefficient_jacobians(s, &pb)?);
        pbs.push(pb);
    }
    Ok((pbs, derivs))
}

/// Euler scheme for `dJ = Db̃(Y)J dt + Σ_l Dσ̃_l(Y)J dB^l`, `J_0 = I`, using
/// derivatives at the left endpoint of each step.
pub fn jacobian_variational_from<T: Real>(
    derivs: &[CoefficientJacobians<T>],
    bg: &BrownianGrid<T>,
    d: usize,
) -> JacobianPath<T> {
    let k = bg.noise_dim();
    let m = d * d;
    let n_states = derivs.len();
    let mut mats = Vec::with_capacity(n_states * m);
    mats.extend(linalg::identity::<T>(d));
    let dt = bg.dt();
    let mut gen = vec![T::zero(); m];
    let mut step = vec![T::zero(); m];
    for i in 0..n_states.saturating_sub(1) {
        let cj = &derivs[i];
        let db = bg.increment(i);
        for (e, g) in gen.iter_mut().enumerate() {
            let mut v = cj.db[e] * dt;
            for (l, &dbl) in db.iter().enumerate().take(k) {
                v += cj.dsigma[l * m + e] * dbl;
            }
            *g = v;
        }
        let cur = mats[i * m..(i + 1) * m].to_vec();
        linalg::matmul(&gen, &cur, d, d, d, &mut step);
        for e in 0..m {
            mats.push(cur[e] + step[e]);
        }
    }
    JacobianPath { d, mats }
}

pub fn jacobian_variational<T: Real>(
    t: &ZvonkinTransform<T>,
    y: &SamplePath<T>,
    bg: &BrownianGrid<T>,
) -> Result<JacobianPath<T>> {
    let (_, derivs) = coefficient_jacobian_path(t, y)?;
    Ok(jacobian_variational_from(&derivs, bg, t.dim()))
}

/// Exponential formula for `d = k = 1` with left-point Itô sums:
/// `JY_t = exp(Σ Dσ̃ ΔB + Σ (Db̃ − ½Dσ̃²) dt)`. Returns `(JY, JY⁻¹)`.
pub fn jacobian_closed_form_from<T: Real>(
    derivs: &[CoefficientJacobians<T>],
    bg: &BrownianGrid<T>,
) -> (Vec<T>, Vec<T>) {
    let dt = bg.dt();
    let half = T::lit(0.5);
    let mut expo = T::zero();
    let mut jy = Vec::with_capacity(derivs.len());
    let mut inv = Vec::with_capacity(derivs.len());
    jy.push(T::one());
    inv.push(T::one());
    for i in 0..derivs.len().saturating_sub(1) {
        let (db, ds) = (derivs[i].db[0], derivs[i].dsigma[0]);
        expo += ds * bg.increment(i)[0] + (db - half * ds * ds) * dt;
        jy.push(expo.exp());
        inv.push((-expo).exp());
    }
    (jy, inv)
}

pub fn jacobian_closed_form<T: Real>(
    t: &ZvonkinTransform<T>,
    y: &SamplePath<T>,
    bg: &BrownianGrid<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    if t.dim() != 1 || t.noise_dim() != 1 {
        return Err(Error::Unsupported("closed-form Jacobian needs d = k = 1".into()));
    }
    let (_, derivs) = coefficient_jacobian_path(t, y)?;
    Ok(jacobian_closed_form_from(&derivs, bg))
}

/// Pointwise matrix inverse along a path.
pub fn invert_jacobians<T: Real>(jp: &JacobianPath<T>) -> Result<JacobianPath<T>> {
    let mut mats = Vec::with_capacity(jp.mats.len());
    for i in 0..jp.n_states() {
        let inv = linalg::inverse(jp.at(i), jp.d)
            .ok_or_else(|| Error::Unsupported(format!("singular flow Jacobian at step {i}")))?;
        mats.extend(inv);
    }
    Ok(JacobianPath { d: jp.d, mats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::MAX_DIM;

    fn cj(db: f64, ds: f64) -> CoefficientJacobians<f64> {
        let mut c = CoefficientJacobians {
            db: [0.0; MAX_DIM * MAX_DIM],
            dsigma: [0.0; MAX_DIM * MAX_DIM * MAX_DIM],
        };
        c.db[0] = db;
        c.dsigma[0] = ds;
        c
    }

    #[test]
    fn deterministic_linear_recursion() {
        let bg = BrownianGrid::<f64>::generate(3, 0, 1000, 1e-3, 1);
        let derivs = vec![cj(-1.0, 0.0); 1001];
        let v = jacobian_variational_from(&derivs, &bg, 1);
        assert!((v.at(1000)[0] - 0.999f64.powi(1000)).abs() < 1e-12);
        let (jy, inv) = jacobian_closed_form_from(&derivs, &bg);
        assert!((jy[1000] - (-1.0f64).exp()).abs() < 1e-12);
        assert!((jy[1000] * inv[1000] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constant_coefficients_give_identity() {
        let bg = BrownianGrid::<f64>::generate(3, 0, 100, 1e-2, 1);
        let v = jacobian_variational_from(&vec![cj(0.0, 0.0); 101], &bg, 1);
        assert!(v.mats.iter().all(|&m| m == 1.0));
    }
}
