use crate::scalar::to_f64_vec;
use crate::{Error, Real, Result};

/// Values on the uniform tensor grid of `[-R, R]^d` with `ncomp` components
/// per node, evaluated off-grid by tensor-product Catmull–Rom interpolation.
///
/// The interpolant is `C¹`, reproduces nodal values exactly, and its
/// gradient at a node equals the centered difference of the nodal values
/// (one-sided on the outer layer). Node index is `i_0 + n·i_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    dim: usize,
    radius: T,
    spacing: T,
    nodes: usize,
    ncomp: usize,
    values: Vec<T>,
}

/// Four-node Catmull–Rom stencil along one axis.
#[derive(Clone, Copy)]
struct AxisStencil<T> {
    idx: [usize; 4],
    w: [T; 4],
    dw: [T; 4],
}

impl<T: Real> GridFunction<T> {
    /// Zero function on `[-radius, radius]^dim` with nominal spacing; the
    /// actual spacing is adjusted so that the box edges are nodes.
    pub fn zeros(dim: usize, radius: T, spacing: T, ncomp: usize) -> Result<Self> {
        if dim == 0 || ncomp == 0 {
            return Err(Error::InvalidInput(
                "grid dimension and components must be positive".into(),
            ));
        }
        if !(radius > T::zero() && spacing > T::zero()) {
            return Err(Error::InvalidInput("grid radius and spacing must be positive".into()));
        }
        let cells = (T::lit(2.0) * radius / spacing).round().to_usize().unwrap_or(0).max(1);
        let nodes = cells + 1;
        let total = nodes
            .checked_pow(dim as u32)
            .and_then(|n| n.checked_mul(ncomp))
            .ok_or_else(|| Error::InvalidInput("grid too large".into()))?;
        Ok(Self {
            dim,
            radius,
            spacing: T::lit(2.0) * radius / T::from_usize(cells).unwrap(),
            nodes,
            ncomp,
            values: vec![T::zero(); total],
        })
    }

    /// Samples `f(x, out)` at every node.
    pub fn from_fn<F>(dim: usize, radius: T, spacing: T, ncomp: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(&[T], &mut [T]),
    {
        let mut g = Self::zeros(dim, radius, spacing, ncomp)?;
        let mut x = vec![T::zero(); dim];
        for node in 0..g.node_count() {
            g.node_coords(node, &mut x);
            let (lo, hi) = (node * ncomp, (node + 1) * ncomp);
            f(&x, &mut g.values[lo..hi]);
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.pow(self.dim as u32)
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn node_values(&self, node: usize) -> &[T] {
        &self.values[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn node_values_mut(&mut self, node: usize) -> &mut [T] {
        let n = self.ncomp;
        &mut self.values[node * n..(node + 1) * n]
    }

    /// Per-axis integer coordinates of a node.
    pub fn node_multi_index(&self, node: usize, out: &mut [usize]) {
        let mut rem = node;
        for o in out.iter_mut().take(self.dim) {
            *o = rem % self.nodes;
            rem /= self.nodes;
        }
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().rev().fold(0, |acc, &i| acc * self.nodes + i)
    }

    pub fn node_coords(&self, node: usize, x: &mut [T]) {
        let mut rem = node;
        for xi in x.iter_mut().take(self.dim) {
            *xi = -self.radius + self.spacing * T::from_usize(rem % self.nodes).unwrap();
            rem /= self.nodes;
        }
    }

    /// True when the node lies on the outer layer of the box.
    pub fn is_boundary(&self, node: usize) -> bool {
        let mut rem = node;
        for _ in 0..self.dim {
            let i = rem % self.nodes;
            if i == 0 || i == self.nodes - 1 {
                return true;
            }
            rem /= self.nodes;
        }
        false
    }

    pub fn contains(&self, x: &[T]) -> bool {
        let slack = self.spacing * T::lit(1e-9);
        x.iter().all(|&v| v.abs() <= self.radius + slack)
    }

    fn axis_stencil(&self, coord: T) -> AxisStencil<T> {
        let n = self.nodes;
        let mut s = ((coord + self.radius) / self.spacing).max(T::zero());
        // Snap rounding noise so that node coordinates hit nodes exactly.
        let nearest = s.round();
        if (s - nearest).abs() <= T::epsilon() * T::lit(64.0) * nearest.max(T::one()) {
            s = nearest;
        }
        let mut i = s.floor().to_usize().unwrap_or(0);
        if i > n - 2 {
            i = n - 2;
        }
        let t = s - T::from_usize(i).unwrap();
        let (t2, t3) = (t * t, t * t * t);
        let (two, three) = (T::lit(2.0), T::lit(3.0));
        let half = T::lit(0.5);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        let d00 = T::lit(6.0) * (t2 - t);
        let d10 = three * t2 - T::lit(4.0) * t + T::one();
        let d01 = -d00;
        let d11 = three * t2 - two * t;

        // Node slopes: centered inside, one-sided at the two ends.
        let left_edge = i == 0;
        let right_edge = i + 1 == n - 1;
        let z = T::zero();
        let (wm, mut w0, mut w1, w2);
        let (dm, mut e0, mut e1, e2);
        if left_edge {
            wm = z;
            dm = z;
            w0 = h00 - h10;
            e0 = d00 - d10;
            w1 = h01 + h10;
            e1 = d01 + d10;
        } else {
            wm = -half * h10;
            dm = -half * d10;
            w0 = h00;
            e0 = d00;
            w1 = h01 + half * h10;
            e1 = d01 + half * d10;
        }
        if right_edge {
            w0 -= h11;
            e0 -= d11;
            w1 += h11;
            e1 += d11;
            w2 = z;
            e2 = z;
        } else {
            w0 -= half * h11;
            e0 -= half * d11;
            w2 = half * h11;
            e2 = half * d11;
        }
        let inv_h = T::one() / self.spacing;
        AxisStencil {
            idx: [i.saturating_sub(1), i, i + 1, (i + 2).min(n - 1)],
            w: [wm, w0, w1, w2],
            dw: [dm * inv_h, e0 * inv_h, e1 * inv_h, e2 * inv_h],
        }
    }

    fn out_of_domain(&self, x: &[T]) -> Error {
        Error::OutOfDomain { point: to_f64_vec(x) }
    }

    /// Interpolated value at `x` (`ncomp` entries).
    pub fn eval(&self, x: &[T], out: &mut [T]) -> Result<()> {
        self.eval_impl(x, out, None)
    }

    /// Interpolated value and gradient; `grad[c·d + j] = ∂_j f^c(x)`.
    pub fn eval_with_gradient(&self, x: &[T], out: &mut [T], grad: &mut [T]) -> Result<()> {
        self.eval_impl(x, out, Some(grad))
    }

    fn eval_impl(&self, x: &[T], out: &mut [T], grad: Option<&mut [T]>) -> Result<()> {
        debug_assert_eq!(x.len(), self.dim);
        if !self.contains(x) || x.iter().any(|v| !v.is_finite()) {
            return Err(self.out_of_domain(x));
        }
        let nc = self.ncomp;
        out[..nc].iter_mut().for_each(|o| *o = T::zero());
        match self.dim {
            1 => {
                let s = self.axis_stencil(x[0]);
                for a in 0..4 {
                    let v = self.node_values(s.idx[a]);
                    for c in 0..nc {
                        out[c] += s.w[a] * v[c];
                    }
                }
                if let Some(g) = grad {
                    g[..nc].iter_mut().for_each(|o| *o = T::zero());
                    for a in 0..4 {
                        let v = self.node_values(s.idx[a]);
                        for c in 0..nc {
                            g[c] += s.dw[a] * v[c];
                        }
                    }
                }
            }
            2 => {
                let sx = self.axis_stencil(x[0]);
                let sy = self.axis_stencil(x[1]);
                let mut grad = grad;
                if let Some(g) = grad.as_deref_mut() {
                    g[..nc * 2].iter_mut().for_each(|o| *o = T::zero());
                }
                for b in 0..4 {
                    for a in 0..4 {
                        let v = self.node_values(sx.idx[a] + self.nodes * sy.idx[b]);
                        let w = sx.w[a] * sy.w[b];
                        for c in 0..nc {
                            out[c] += w * v[c];
                        }
                        if let Some(g) = grad.as_deref_mut() {
                            let (gx, gy) = (sx.dw[a] * sy.w[b], sx.w[a] * sy.dw[b]);
                            for c in 0..nc {
                                g[c * 2] += gx * v[c];
                                g[c * 2 + 1] += gy * v[c];
                            }
                        }
                    }
                }
            }
            d => return Err(Error::Unsupported(format!("grid interpolation in dimension {d}"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_values_are_reproduced_exactly() {
        let g = GridFunction::<f64>::from_fn(1, 2.0, 0.25, 1, |x, o| o[0] = x[0].sin() + x[0] * x[0]).unwrap();
        let mut x = [0.0];
        let mut out = [0.0];
        for node in 0..g.node_count() {
            g.node_coords(node, &mut x);
            g.eval(&x, &mut out).unwrap();
            assert_eq!(out[0], g.node_values(node)[0]);
        }
    }

    #[test]
    fn gradient_at_nodes_is_the_centered_difference() {
        let g = GridFunction::<f64>::from_fn(1, 1.0, 0.1, 1, |x, o| o[0] = x[0].powi(3)).unwrap();
        let h = g.spacing();
        let mut x = [0.0];
        let (mut v, mut d) = ([0.0], [0.0]);
        for node in 1..g.node_count() - 1 {
            g.node_coords(node, &mut x);
            g.eval_with_gradient(&x, &mut v, &mut d).unwrap();
            let cd = (g.node_values(node + 1)[0] - g.node_values(node - 1)[0]) / (2.0 * h);
            assert!((d[0] - cd).abs() < 1e-12);
        }
    }

    #[test]
    fn quadratics_reproduced_in_two_dimensions_away_from_edges() {
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let g = GridFunction::<f64>::from_fn(2, 3.0, 0.5, 1, |x, o| o[0] = f(x)).unwrap();
        let p = [0.3, -1.1];
        let (mut v, mut gr) = ([0.0], [0.0; 2]);
        g.eval_with_gradient(&p, &mut v, &mut gr).unwrap();
        assert!((v[0] - f(&p)).abs() < 1e-12);
        assert!((gr[0] - (2.0 + 0.5 * p[1])).abs() < 1e-12);
        assert!((gr[1] - (-1.0 + 0.5 * p[0])).abs() < 1e-12);
    }

    #[test]
    fn outside_the_box_is_an_error() {
        let g = GridFunction::<f64>::zeros(1, 1.0, 0.1, 1).unwrap();
        assert!(matches!(g.eval(&[1.5], &mut [0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn boundary_classification() {
        let g = GridFunction::<f64>::zeros(2, 1.0, 0.5, 1).unwrap();
        assert_eq!(g.nodes_per_axis(), 5);
        assert!(g.is_boundary(0));
        assert!(g.is_boundary(g.node_index(&[2, 4])));
        assert!(!g.is_boundary(g.node_index(&[2, 3])));
    }
}
