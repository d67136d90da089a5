use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Real, Result};

/// Random stream of path `path_index` under `seed`. Streams are disjoint,
/// so a path's draws do not depend on how paths are scheduled.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Gaussian increments `ΔB_i ~ N(0, dt·I_k)` of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianGrid<T> {
    n_steps: usize,
    dt: T,
    k: usize,
    increments: Vec<T>,
    seed: u64,
    path_index: u64,
}

impl<T: Real> BrownianGrid<T> {
    pub fn generate(seed: u64, path_index: u64, n_steps: usize, dt: T, k: usize) -> Self {
        let mut rng = path_rng(seed, path_index);
        Self::generate_with(&mut rng, seed, path_index, n_steps, dt, k)
    }

    pub(crate) fn generate_with<R: rand::Rng>(
        rng: &mut R,
        seed: u64,
        path_index: u64,
        n_steps: usize,
        dt: T,
        k: usize,
    ) -> Self {
        let sd = dt.sqrt();
        let increments = (0..n_steps * k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::lit(z) * sd
            })
            .collect();
        Self {
            n_steps,
            dt,
            k,
            increments,
            seed,
            path_index,
        }
    }

    pub fn from_increments(dt: T, k: usize, increments: Vec<T>) -> Result<Self> {
        if k == 0 || !increments.len().is_multiple_of(k) {
            return Err(Error::DimensionMismatch("increments not a multiple of k".into()));
        }
        Ok(Self {
            n_steps: increments.len() / k,
            dt,
            k,
            increments,
            seed: 0,
            path_index: 0,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn noise_dim(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn increments(&self) -> &[T] {
        &self.increments
    }

    #[inline]
    pub fn increment(&self, step: usize) -> &[T] {
        &self.increments[step * self.k..(step + 1) * self.k]
    }

    /// `B_T` per component.
    pub fn terminal(&self) -> Vec<T> {
        let mut b = vec![T::zero(); self.k];
        for i in 0..self.n_steps {
            for (bl, &d) in b.iter_mut().zip(self.increment(i)) {
                *bl += d;
            }
        }
        b
    }

    /// Sums consecutive blocks of `factor` increments (same Brownian path at
    /// step `factor·dt`).
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(Error::InvalidInput(format!(
                "cannot coarsen {} steps by {factor}",
                self.n_steps
            )));
        }
        let n = self.n_steps / factor;
        let mut inc = vec![T::zero(); n * self.k];
        for i in 0..self.n_steps {
            for l in 0..self.k {
                inc[(i / factor) * self.k + l] += self.increments[i * self.k + l];
            }
        }
        Ok(Self {
            n_steps: n,
            dt: self.dt * T::from_usize(factor).unwrap(),
            k: self.k,
            increments: inc,
            seed: self.seed,
            path_index: self.path_index,
        })
    }

    /// Shifts the path by `ε·h` on noise component `component`, where
    /// `ḣ = 1` on `[r1, r2]` and 0 elsewhere.
    pub fn cameron_martin(&self, r1: T, r2: T, eps: T, component: usize) -> Result<Self> {
        if !(r1 >= T::zero() && r2 > r1) || component >= self.k {
            return Err(Error::InvalidInput("need 0 ≤ r1 < r2 and a valid component".into()));
        }
        let mut out = self.clone();
        for i in 0..self.n_steps {
            let a = self.dt * T::from_usize(i).unwrap();
            let b = a + self.dt;
            let overlap = (b.min(r2) - a.max(r1)).max(T::zero());
            out.increments[i * self.k + component] += eps * overlap;
        }
        Ok(out)
    }
}
