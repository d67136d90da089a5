use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::flowsim::path_rng;
use crate::model::SdeProblem;
use crate::{Error, Real, Result};

/// Monte-Carlo estimate of `ψ_λ(x)` per component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub n_paths: usize,
}

/// Feynman–Kac estimate `ψ_λ(x) = E ∫₀^{t_max} e^{−λt} b(X_t(x)) dt` with
/// Euler paths of the original equation and trapezoid time quadrature.
///
/// Only meant to cross-check the grid solver at probe points.
pub fn solve_resolvent_mc<T: Real>(
    problem: &SdeProblem<T>,
    lambda: f64,
    x: &[T],
    n_paths: usize,
    t_max: f64,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    if n_paths < 100 {
        return Err(Error::InsufficientSample {
            got: n_paths,
            need: 100,
        });
    }
    if !(lambda > 0.0 && dt > 0.0 && t_max > 0.0) {
        return Err(Error::InvalidInput("λ, dt and t_max must be positive".into()));
    }
    if lambda * t_max < 10.0 {
        return Err(Error::InvalidInput(format!(
            "λ·t_max = {} < 10 leaves a non-negligible tail",
            lambda * t_max
        )));
    }
    let d = problem.dim();
    let k = problem.noise_dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch("probe point".into()));
    }
    let n_steps = (t_max / dt).round().max(1.0) as usize;
    let dt_t = T::lit(t_max / n_steps as f64);
    let sqrt_dt = dt_t.sqrt();
    let decay = (-T::lit(lambda) * dt_t).exp();
    let half = T::lit(0.5);

    let per_path: Vec<Vec<T>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i as u64);
            let mut state = x.to_vec();
            let mut b = vec![T::zero(); d];
            let mut sig = vec![T::zero(); d * k];
            let mut dw = vec![T::zero(); k];
            let mut acc = vec![T::zero(); d];
            let mut weight = T::one();
            problem.drift().eval_into(&state, &mut b);
            for c in 0..d {
                acc[c] += half * b[c];
            }
            for step in 0..n_steps {
                problem.diffusion().eval_into(&state, &mut sig);
                for w in dw.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *w = T::lit(z) * sqrt_dt;
                }
                for r in 0..d {
                    let mut noise = T::zero();
                    for l in 0..k {
                        noise += sig[r * k + l] * dw[l];
                    }
                    state[r] += b[r] * dt_t + noise;
                }
                weight *= decay;
                problem.drift().eval_into(&state, &mut b);
                let w = if step + 1 == n_steps { half * weight } else { weight };
                for c in 0..d {
                    acc[c] += w * b[c];
                }
            }
            acc.iter().map(|&a| a * dt_t).collect()
        })
        .collect();

    let n = T::from_usize(n_paths).unwrap();
    let mut mean = vec![T::zero(); d];
    for v in &per_path {
        for c in 0..d {
            mean[c] += v[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![T::zero(); d];
    for v in &per_path {
        for c in 0..d {
            var[c] += (v[c] - mean[c]) * (v[c] - mean[c]);
        }
    }
    let std_error = var.iter().map(|&s| (s / (n - T::one()) / n).sqrt().as_f64()).collect();
    Ok(McEstimate {
        mean: mean.iter().map(|m| m.as_f64()).collect(),
        std_error,
        n_paths,
    })
}
