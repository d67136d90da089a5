#![allow(dead_code)]

use zvonkin::model::{DiffusionSpec, DriftSpec, ProblemSpec, SdeProblem};
use zvonkin::resolvent::{auto_lambda, solve_resolvent_fd};
use zvonkin::transform::{build_transform, ZvonkinTransform};

pub fn problem(x0: f64, drift: DriftSpec, diffusion: DiffusionSpec) -> SdeProblem<f64> {
    ProblemSpec {
        dim: 1,
        x0: vec![x0],
        horizon: 1.0,
        theta: 0.5,
        drift,
        diffusion,
    }
    .build()
    .unwrap()
}

/// `b = |x|^{1/2}`, `σ = 1 + 0.3 sin x`, `x0 = 0`.
pub fn rough() -> SdeProblem<f64> {
    problem(
        0.0,
        DriftSpec::SqrtAbs { scale: 1.0 },
        DiffusionSpec::Sinusoidal { base: 1.0, amp: 0.3 },
    )
}

/// `b = βx`, `σ ≡ s`.
pub fn linear(beta: f64, s: f64, x0: f64) -> SdeProblem<f64> {
    problem(x0, DriftSpec::Linear { beta }, DiffusionSpec::Constant { value: s })
}

pub fn transform_at(p: &SdeProblem<f64>, lambda: f64) -> ZvonkinTransform<f64> {
    build_transform(solve_resolvent_fd(p, lambda, 10.0, 0.01).unwrap(), p).unwrap()
}

pub fn auto_transform(p: &SdeProblem<f64>) -> ZvonkinTransform<f64> {
    build_transform(auto_lambda(p, 10.0, 0.01).unwrap(), p).unwrap()
}

pub fn max_of(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(f64::NEG_INFINITY, f64::max)
}
