use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

type ScalarFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Scalar functional `G(t, x)` of a one-dimensional state with
/// `|∂_xG| ≥ lower_bound` claimed everywhere.
#[derive(Clone)]
pub struct FunctionalG<T> {
    label: String,
    eval: ScalarFn<T>,
    dx: ScalarFn<T>,
    lower_bound: T,
}

impl<T> fmt::Debug for FunctionalG<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalG")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl<T: Real> FunctionalG<T> {
    pub fn new<F, D>(label: impl Into<String>, eval: F, dx: D, lower_bound: T) -> Result<Self>
    where
        F: Fn(T, T) -> T + Send + Sync + 'static,
        D: Fn(T, T) -> T + Send + Sync + 'static,
    {
        if !(lower_bound > T::zero()) {
            return Err(Error::InvalidInput("functional lower bound must be positive".into()));
        }
        Ok(Self {
            label: label.into(),
            eval: Arc::new(eval),
            dx: Arc::new(dx),
            lower_bound,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: T, x: T) -> T {
        (self.eval)(t, x)
    }

    pub fn dx(&self, t: T, x: T) -> T {
        (self.dx)(t, x)
    }

    pub fn lower_bound(&self) -> T {
        self.lower_bound
    }

    /// Checks `|∂_xG(t, x)| ≥ lower_bound` at each point, naming the first violation.
    pub fn check_lower_bound(&self, t: T, xs: impl IntoIterator<Item = T>) -> Result<()> {
        for x in xs {
            let v = self.dx(t, x);
            if !(v.abs() >= self.lower_bound) {
                return Err(Error::FunctionalBound {
                    x: x.as_f64(),
                    value: v.as_f64(),
                    bound: self.lower_bound.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Catalog of functionals selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `G = x`.
    Identity,
    /// `G = factor·x`.
    Scaled { factor: f64 },
    /// `G = x + amp·sin x`, requires `|amp| < 1`.
    SinePerturbed { amp: f64 },
}

impl FunctionalSpec {
    pub fn build<T: Real>(&self) -> Result<FunctionalG<T>> {
        match *self {
            FunctionalSpec::Identity => FunctionalG::new("identity", |_, x| x, |_, _| T::one(), T::one()),
            FunctionalSpec::Scaled { factor } => {
                let c = T::lit(factor);
                FunctionalG::new(format!("scaled({factor})"), move |_, x| c * x, move |_, _| c, c.abs())
            }
            FunctionalSpec::SinePerturbed { amp } => {
                if !(amp.abs() < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "sine_perturbed needs |amp| < 1, got {amp}"
                    )));
                }
                let a = T::lit(amp);
                FunctionalG::new(
                    format!("sine_perturbed(amp={amp})"),
                    move |_, x: T| x + a * x.sin(),
                    move |_, x: T| T::one() + a * x.cos(),
                    T::one() - a.abs(),
                )
            }
        }
    }
}
