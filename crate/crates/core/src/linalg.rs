//! Small dense row-major matrix helpers for the `d × d` and `d × k` blocks
//! that appear pointwise along grids and paths.
//!
//! Dimensions here are tiny (1 or 2 in practice), so the 1×1 and 2×2 cases
//! are closed form and anything larger is delegated to `nalgebra` in `f64`.

use nalgebra::DMatrix;

use crate::Real;

/// `c = a · b` with `a: n×m`, `b: m×p`.
pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize, m: usize, p: usize, c: &mut [T]) {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), m * p);
    for i in 0..n {
        for j in 0..p {
            let mut s = T::zero();
            for l in 0..m {
                s += a[i * m + l] * b[l * p + j];
            }
            c[i * p + j] = s;
        }
    }
}

/// `a = s sᵀ` for `s: d×k`.
pub fn outer_self<T: Real>(s: &[T], d: usize, k: usize, a: &mut [T]) {
    for i in 0..d {
        for j in 0..d {
            let mut acc = T::zero();
            for l in 0..k {
                acc += s[i * k + l] * s[j * k + l];
            }
            a[i * d + j] = acc;
        }
    }
}

pub fn identity<T: Real>(d: usize) -> Vec<T> {
    let mut m = vec![T::zero(); d * d];
    for i in 0..d {
        m[i * d + i] = T::one();
    }
    m
}

pub fn det<T: Real>(m: &[T], d: usize) -> T {
    match d {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => T::lit(to_dmatrix(m, d, d).determinant()),
    }
}

/// Inverse of a `d×d` matrix, `None` when singular to working precision.
pub fn inverse<T: Real>(m: &[T], d: usize) -> Option<Vec<T>> {
    let scale = max_abs(m).max(T::one());
    let det = det(m, d);
    if !det.is_finite() || det.abs() <= T::epsilon() * scale.powi(d as i32) {
        return None;
    }
    match d {
        1 => Some(vec![T::one() / m[0]]),
        2 => Some(vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det]),
        _ => to_dmatrix(m, d, d).try_inverse().map(|inv| from_dmatrix(&inv)),
    }
}

/// Solves `m x = r` in place for `d ≤ 2`, falling back to the general inverse.
pub fn solve_in_place<T: Real>(m: &[T], d: usize, r: &mut [T]) -> bool {
    match d {
        1 => {
            if m[0] == T::zero() {
                return false;
            }
            r[0] /= m[0];
            true
        }
        2 => {
            let det = m[0] * m[3] - m[1] * m[2];
            if det == T::zero() || !det.is_finite() {
                return false;
            }
            let (a, b) = (r[0], r[1]);
            r[0] = (m[3] * a - m[1] * b) / det;
            r[1] = (m[0] * b - m[2] * a) / det;
            true
        }
        _ => match inverse(m, d) {
            Some(inv) => {
                let rhs = r.to_vec();
                for i in 0..d {
                    r[i] = (0..d).map(|j| inv[i * d + j] * rhs[j]).sum();
                }
                true
            }
            None => false,
        },
    }
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues<T: Real>(m: &[T], d: usize) -> Vec<T> {
    match d {
        1 => vec![m[0]],
        2 => {
            let (a, b, c) = (m[0], T::lit(0.5) * (m[1] + m[2]), m[3]);
            let mean = T::lit(0.5) * (a + c);
            let rad = (T::lit(0.25) * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => {
            let eig = to_dmatrix(m, d, d).symmetric_eigen();
            let mut v: Vec<T> = eig.eigenvalues.iter().map(|&e| T::lit(e)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
            v
        }
    }
}

/// Largest and smallest singular values of a square matrix.
pub fn singular_extremes<T: Real>(m: &[T], d: usize) -> (T, T) {
    if d == 1 {
        return (m[0].abs(), m[0].abs());
    }
    let mut mtm = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            mtm[i * d + j] = (0..d).map(|l| m[l * d + i] * m[l * d + j]).sum();
        }
    }
    let eig = sym_eigenvalues(&mtm, d);
    let lo = eig[0].max(T::zero()).sqrt();
    let hi = eig[d - 1].max(T::zero()).sqrt();
    (hi, lo)
}

/// Spectral (operator 2-) norm.
pub fn op_norm<T: Real>(m: &[T], d: usize) -> T {
    singular_extremes(m, d).0
}

/// Hilbert–Schmidt (Frobenius) norm.
pub fn frobenius<T: Real>(m: &[T]) -> T {
    m.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub fn max_abs<T: Real>(m: &[T]) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
}

pub fn norm<T: Real>(v: &[T]) -> T {
    frobenius(v)
}

fn to_dmatrix<T: Real>(m: &[T], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_iterator(rows, cols, m.iter().map(|v| v.as_f64()))
}

fn from_dmatrix<T: Real>(m: &DMatrix<f64>) -> Vec<T> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(T::lit(m[(i, j)]));
        }
    }
    out
}
