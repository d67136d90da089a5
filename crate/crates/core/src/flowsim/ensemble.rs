use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{ks_distance, KsResult};
use crate::model::SdeProblem;
use crate::transform::ZvonkinTransform;
use crate::{Error, Real, Result};

use super::{euler_maruyama, euler_terminal, step_count, BrownianGrid, Restricted, SamplePath};

/// A run fails when more than this fraction of paths leaves the validated box.
pub const MAX_ESCAPE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Storage {
    Terminal,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    XDirect,
    Y,
    XMapped,
}

/// Full paths of one index; `x_mapped` is `φ_λ⁻¹` applied statewise to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedPaths<T> {
    pub x_direct: SamplePath<T>,
    pub y: SamplePath<T>,
    pub x_mapped: Vec<T>,
}

/// Terminal values of one path index. A family that escaped is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRecord<T> {
    pub path_index: u64,
    pub x_direct: Option<Vec<T>>,
    pub y: Option<Vec<T>>,
    pub x_mapped: Option<Vec<T>>,
    pub paths: Option<PairedPaths<T>>,
}

impl<T: Real> PairedRecord<T> {
    pub fn escaped(&self) -> bool {
        self.x_direct.is_none() || self.y.is_none() || self.x_mapped.is_none()
    }

    pub fn terminal(&self, family: Family) -> Option<&[T]> {
        match family {
            Family::XDirect => self.x_direct.as_deref(),
            Family::Y => self.y.as_deref(),
            Family::XMapped => self.x_mapped.as_deref(),
        }
    }
}

/// Original, transformed and mapped-back paths on shared increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble<T> {
    pub dim: usize,
    pub noise_dim: usize,
    pub n_steps: usize,
    pub dt: T,
    pub seed: u64,
    pub y0: Vec<T>,
    pub records: Vec<PairedRecord<T>>,
}

fn simulate_one<T: Real>(
    problem: &SdeProblem<T>,
    t: &ZvonkinTransform<T>,
    y0: &[T],
    bg: &BrownianGrid<T>,
    storage: Storage,
) -> Result<PairedRecord<T>> {
    let direct = Restricted {
        inner: problem,
        radius: t.valid_radius().as_f64(),
    };
    let x0 = problem.x0();
    let map_back = |y: &[T]| match t.invert_phi(y) {
        Ok(x) => Ok(Some(x)),
        Err(Error::OutOfDomain { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    match storage {
        Storage::Terminal => {
            let xd = euler_terminal(&direct, x0, x0, bg)?;
            let y = euler_terminal(t, y0, x0, bg)?;
            let xm = match &y {
                Some(y) => map_back(y)?,
                None => None,
            };
            Ok(PairedRecord {
                path_index: bg.path_index(),
                x_direct: xd,
                y,
                x_mapped: xm,
                paths: None,
            })
        }
        Storage::Full => {
            let xd = euler_maruyama(&direct, x0, x0, bg)?;
            let y = euler_maruyama(t, y0, x0, bg)?;
            let mut xm = Vec::with_capacity(y.states.len());
            let mut mapped_ok = true;
            for i in 0..y.n_states() {
                match map_back(y.state(i))? {
                    Some(x) => xm.extend(x),
                    None => {
                        mapped_ok = false;
                        break;
                    }
                }
            }
            let x_direct = (!xd.escaped()).then(|| xd.terminal().to_vec());
            let y_term = (!y.escaped()).then(|| y.terminal().to_vec());
            let x_mapped = (y_term.is_some() && mapped_ok).then(|| xm[xm.len() - t.dim()..].to_vec());
            Ok(PairedRecord {
                path_index: bg.path_index(),
                x_direct,
                y: y_term,
                x_mapped,
                paths: Some(PairedPaths {
                    x_direct: xd,
                    y,
                    x_mapped: xm,
                }),
            })
        }
    }
}

/// Simulates the original equation, the transformed equation from
/// `Y_0 = φ_λ(x0)`, and `φ_λ⁻¹(Y)`, all on the increments of path `(seed, i)`.
/// The original equation is stopped on leaving the transform's valid box.
pub fn simulate_equivalent_pair<T: Real>(
    problem: &SdeProblem<T>,
    t: &ZvonkinTransform<T>,
    n_paths: usize,
    dt: T,
    seed: u64,
    storage: Storage,
) -> Result<PathEnsemble<T>> {
    if problem.dim() != t.dim() || problem.noise_dim() != t.noise_dim() {
        return Err(Error::DimensionMismatch(
            "problem and transform dimensions differ".into(),
        ));
    }
    if n_paths == 0 || !(dt > T::zero()) {
        return Err(Error::InvalidInput("need n_paths > 0 and dt > 0".into()));
    }
    let n_steps = step_count(problem.horizon().as_f64(), dt.as_f64());
    let y0 = t.phi(problem.x0())?;
    let records = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let bg = BrownianGrid::generate(seed, i as u64, n_steps, dt, t.noise_dim());
            simulate_one(problem, t, &y0, &bg, storage)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathEnsemble {
        dim: t.dim(),
        noise_dim: t.noise_dim(),
        n_steps,
        dt,
        seed,
        y0,
        records,
    })
}

impl<T: Real> PathEnsemble<T> {
    pub fn n_paths(&self) -> usize {
        self.records.len()
    }

    pub fn escaped_count(&self) -> usize {
        self.records.iter().filter(|r| r.escaped()).count()
    }

    /// Fails when the escaped fraction exceeds [`MAX_ESCAPE_FRACTION`].
    pub fn check_escapes(&self) -> Result<()> {
        let escaped = self.escaped_count();
        if escaped as f64 > MAX_ESCAPE_FRACTION * self.n_paths() as f64 {
            return Err(Error::ExcessiveEscapes {
                escaped,
                total: self.n_paths(),
            });
        }
        Ok(())
    }

    /// Terminal values of one component over paths where no family escaped.
    pub fn terminal_samples(&self, family: Family, component: usize) -> Vec<T> {
        self.records
            .iter()
            .filter(|r| !r.escaped())
            .map(|r| r.terminal(family).expect("non-escaped record")[component])
            .collect()
    }

    pub fn horizon(&self) -> T {
        self.dt * T::from_usize(self.n_steps).unwrap()
    }

    /// Sample moments per family, KS statistics between the original and
    /// mapped-back terminal laws, and the mean pathwise terminal gap.
    pub fn summary(&self) -> Result<EnsembleSummary> {
        let mut components = Vec::with_capacity(self.dim);
        for c in 0..self.dim {
            let xd = self.terminal_samples(Family::XDirect, c);
            let y = self.terminal_samples(Family::Y, c);
            let xm = self.terminal_samples(Family::XMapped, c);
            let gap = if xd.is_empty() {
                f64::NAN
            } else {
                xd.iter().zip(&xm).map(|(a, b)| (*a - *b).abs().as_f64()).sum::<f64>() / xd.len() as f64
            };
            components.push(ComponentSummary {
                component: c,
                x_direct: moments(&xd),
                y: moments(&y),
                x_mapped: moments(&xm),
                ks_direct_vs_mapped: ks_distance(&xd, &xm)?,
                mean_terminal_gap: gap,
            });
        }
        Ok(EnsembleSummary {
            n_paths: self.n_paths(),
            n_steps: self.n_steps,
            dt: self.dt.as_f64(),
            seed: self.seed,
            escaped: self.escaped_count(),
            max_escape_fraction: MAX_ESCAPE_FRACTION,
            y0: self.y0.iter().map(|v| v.as_f64()).collect(),
            components,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

/// Mean, unbiased variance and standard error of the mean, summed in order.
pub fn moments<T: Real>(xs: &[T]) -> Moments {
    let n = xs.len();
    if n == 0 {
        return Moments {
            n,
            mean: f64::NAN,
            variance: f64::NAN,
            std_error: f64::NAN,
        };
    }
    let mean = xs.iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Moments {
        n,
        mean,
        variance,
        std_error: (variance / n as f64).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: usize,
    pub x_direct: Moments,
    pub y: Moments,
    pub x_mapped: Moments,
    pub ks_direct_vs_mapped: KsResult,
    pub mean_terminal_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub escaped: usize,
    pub max_escape_fraction: f64,
    pub y0: Vec<f64>,
    pub components: Vec<ComponentSummary>,
}
