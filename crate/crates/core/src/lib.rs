//! Numerical laboratory for SDEs with unbounded Hölder-continuous drift.
//!
//! The drift is removed by the change of variables `φ_λ = id + ψ_λ`, where
//! `ψ_λ` solves the resolvent equation `λψ − Lψ = b` for the Kolmogorov
//! operator `L` of the original equation. The transformed process
//! `Y = φ_λ(X)` solves an SDE with regular coefficients
//!
//! ```text
//! b̃(y) = λ ψ_λ(φ_λ⁻¹(y)),    σ̃(y) = Dφ_λ(φ_λ⁻¹(y)) σ(φ_λ⁻¹(y)),
//! ```
//!
//! on which flow Jacobians and Malliavin derivatives are computable. The
//! modules follow the pipeline order:
//!
//! * [`model`]: problems, coefficient catalog and assumption audits;
//! * [`resolvent`]: grid and Monte-Carlo solvers for `λψ − Lψ = b`;
//! * [`transform`]: `φ_λ`, its Newton inverse and the transformed coefficients;
//! * [`flowsim`]: paired Euler simulation, Jacobians, Malliavin derivatives;
//! * [`density`]: KDE, change of variables, Nourdin–Viens reconstruction, KS.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are the instantiations the harness uses.

// Negated comparisons reject NaN along with out-of-range values; index
// loops follow the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod error;
pub mod flowsim;
pub mod linalg;
pub mod model;
pub mod resolvent;
mod scalar;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type VectorField64 = model::VectorField<f64>;
pub type SdeProblem64 = model::SdeProblem<f64>;
pub type GridFunction64 = resolvent::GridFunction<f64>;
pub type ResolventSolution64 = resolvent::ResolventSolution<f64>;
pub type ZvonkinTransform64 = transform::ZvonkinTransform<f64>;
pub type BrownianGrid64 = flowsim::BrownianGrid<f64>;
pub type PathEnsemble64 = flowsim::PathEnsemble<f64>;
pub type FunctionalG64 = flowsim::FunctionalG<f64>;
pub type DensityEstimate64 = density::DensityEstimate<f64>;

pub type SdeProblem32 = model::SdeProblem<f32>;
pub type ResolventSolution32 = resolvent::ResolventSolution<f32>;
pub type ZvonkinTransform32 = transform::ZvonkinTransform<f32>;
