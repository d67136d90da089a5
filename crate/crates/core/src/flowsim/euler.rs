use crate::model::SdeProblem;
use crate::scalar::to_f64_vec;
use crate::transform::{ZvonkinTransform, MAX_DIM};
use crate::{Error, Real, Result};

use super::BrownianGrid;

/// Drift and diffusion of an equation driven by Euler–Maruyama.
///
/// `hint` holds per-path solver state carried between consecutive calls
/// (the previous pre-image for the transformed equation). It has
/// `state_dim` entries and starts at the initial state's pre-image.
/// An [`Error::OutOfDomain`] return marks the path as escaped.
pub trait Coefficients<T: Real>: Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn evaluate(&self, x: &[T], hint: &mut [T], drift: &mut [T], diffusion: &mut [T]) -> Result<()>;
}

impl<T: Real> Coefficients<T> for SdeProblem<T> {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn noise_dim(&self) -> usize {
        SdeProblem::noise_dim(self)
    }

    fn evaluate(&self, x: &[T], _hint: &mut [T], drift: &mut [T], diffusion: &mut [T]) -> Result<()> {
        self.drift().eval_into(x, drift);
        self.diffusion().eval_into(x, diffusion);
        Ok(())
    }
}

impl<T: Real> Coefficients<T> for ZvonkinTransform<T> {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn noise_dim(&self) -> usize {
        ZvonkinTransform::noise_dim(self)
    }

    fn evaluate(&self, y: &[T], hint: &mut [T], drift: &mut [T], diffusion: &mut [T]) -> Result<()> {
        let pb = self.pullback_from(y, hint)?;
        hint.copy_from_slice(&pb.x[..self.dim()]);
        self.coefficients_at(&pb, drift, diffusion);
        Ok(())
    }
}

/// Coefficients restricted to the box `|x_i| ≤ radius`; leaving it is an escape.
#[derive(Debug, Clone, Copy)]
pub struct Restricted<'a, C> {
    pub inner: &'a C,
    pub radius: f64,
}

impl<T: Real, C: Coefficients<T>> Coefficients<T> for Restricted<'_, C> {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    fn evaluate(&self, x: &[T], hint: &mut [T], drift: &mut [T], diffusion: &mut [T]) -> Result<()> {
        if x.iter().any(|v| !(v.as_f64().abs() <= self.radius)) {
            return Err(Error::OutOfDomain { point: to_f64_vec(x) });
        }
        self.inner.evaluate(x, hint, drift, diffusion)
    }
}

/// States `X_0, …, X_m` of one Euler path; `m < n_steps` when it escaped.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<T> {
    pub dim: usize,
    pub dt: T,
    pub states: Vec<T>,
    /// Step at which the state left the domain, if it did.
    pub escaped_at: Option<usize>,
}

impl<T: Real> SamplePath<T> {
    pub fn n_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[T] {
        self.state(self.n_states() - 1)
    }

    pub fn escaped(&self) -> bool {
        self.escaped_at.is_some()
    }
}

/// Runs the scheme and hands each state to `visit(step, state)`. Returns the
/// escape step, if any. Errors other than leaving the domain propagate.
fn walk<T: Real, C: Coefficients<T> + ?Sized>(
    coeffs: &C,
    x0: &[T],
    hint0: &[T],
    bg: &BrownianGrid<T>,
    mut visit: impl FnMut(usize, &[T]),
) -> Result<Option<usize>> {
    let (d, k) = (coeffs.state_dim(), coeffs.noise_dim());
    if x0.len() != d || bg.noise_dim() != k || d > MAX_DIM || k > MAX_DIM {
        return Err(Error::DimensionMismatch(format!(
            "state {d}, noise {k}, x0 {}, Brownian {}",
            x0.len(),
            bg.noise_dim()
        )));
    }
    let dt = bg.dt();
    let mut x = [T::zero(); MAX_DIM];
    let mut hint = [T::zero(); MAX_DIM];
    let mut b = [T::zero(); MAX_DIM];
    let mut s = [T::zero(); MAX_DIM * MAX_DIM];
    x[..d].copy_from_slice(x0);
    hint[..d].copy_from_slice(hint0);
    visit(0, &x[..d]);
    for i in 0..bg.n_steps() {
        match coeffs.evaluate(&x[..d], &mut hint[..d], &mut b[..d], &mut s[..d * k]) {
            Ok(()) => {}
            Err(Error::OutOfDomain { .. }) => return Ok(Some(i)),
            Err(e) => return Err(e),
        }
        let dbm = bg.increment(i);
        for r in 0..d {
            let mut inc = b[r] * dt;
            for l in 0..k {
                inc += s[r * k + l] * dbm[l];
            }
            x[r] += inc;
        }
        if x[..d].iter().any(|v| !v.is_finite()) {
            return Ok(Some(i + 1));
        }
        visit(i + 1, &x[..d]);
    }
    Ok(None)
}

/// Euler–Maruyama path from `x0`; `hint0` seeds the per-path solver state.
pub fn euler_maruyama<T: Real, C: Coefficients<T> + ?Sized>(
    coeffs: &C,
    x0: &[T],
    hint0: &[T],
    bg: &BrownianGrid<T>,
) -> Result<SamplePath<T>> {
    let mut states = Vec::with_capacity((bg.n_steps() + 1) * x0.len());
    let escaped_at = walk(coeffs, x0, hint0, bg, |_, x| states.extend_from_slice(x))?;
    Ok(SamplePath {
        dim: x0.len(),
        dt: bg.dt(),
        states,
        escaped_at,
    })
}

/// Terminal state only, `None` when the path escaped.
pub fn euler_terminal<T: Real, C: Coefficients<T> + ?Sized>(
    coeffs: &C,
    x0: &[T],
    hint0: &[T],
    bg: &BrownianGrid<T>,
) -> Result<Option<Vec<T>>> {
    let mut last = x0.to_vec();
    let escaped = walk(coeffs, x0, hint0, bg, |_, x| last.copy_from_slice(x))?;
    Ok(if escaped.is_some() { None } else { Some(last) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VectorField;

    fn ou() -> SdeProblem<f64> {
        SdeProblem::new(
            VectorField::componentwise(1, "ou", |x: f64| -x),
            VectorField::diagonal(1, "unit", |_x: f64| 1.0),
            vec![1.0],
            1.0,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn zero_noise_matches_explicit_recursion() {
        let p = ou();
        let bg = BrownianGrid::from_increments(0.01, 1, vec![0.0; 100]).unwrap();
        let path = euler_maruyama(&p, &[1.0], &[1.0], &bg).unwrap();
        assert_eq!(path.n_states(), 101);
        assert!((path.terminal()[0] - 0.99f64.powi(100)).abs() < 1e-14);
    }

    #[test]
    fn restriction_reports_escape() {
        let p = ou();
        let bg = BrownianGrid::from_increments(0.01, 1, vec![1.0; 10]).unwrap();
        let r = Restricted { inner: &p, radius: 3.0 };
        let path = euler_maruyama(&r, &[1.0], &[1.0], &bg).unwrap();
        assert!(path.escaped());
        assert!(euler_terminal(&r, &[1.0], &[1.0], &bg).unwrap().is_none());
    }
}
