//! Direct solvers for the constant-coefficient operators of the scheme by
//! separable eigen-decomposition ("fast diagonalization").
//!
//! On a uniform grid the 1D second-difference matrices with mirror-ghost
//! (Neumann), odd-ghost (Dirichlet at a face) and nodal Dirichlet closures
//! have closed-form orthogonal eigenbases (cosine/sine families). A 2D
//! operator `f(L)` with `L = -Laplacian` is inverted by transforming to the
//! tensor eigenbasis, dividing by the symbol, and transforming back.

use crate::exec;
use std::f64::consts::PI;

/// Orthonormal eigenbasis of a 1D second-difference matrix `-D2`.
#[derive(Debug, Clone)]
pub struct Basis1d {
    pub n: usize,
    /// `q[i * n + k]`: component `i` of eigenvector `k`.
    pub q: Vec<f64>,
    pub lam: Vec<f64>,
}

impl Basis1d {
    fn build(
        n: usize,
        h: f64,
        vec: impl Fn(usize, usize) -> f64,
        mode: impl Fn(usize) -> usize,
        cells: usize,
    ) -> Self {
        let mut q = vec![0.0; n * n];
        let mut lam = vec![0.0; n];
        for k in 0..n {
            let m = mode(k);
            lam[k] = (2.0 - 2.0 * (m as f64 * PI / cells as f64).cos()) / (h * h);
            let mut norm = 0.0;
            for i in 0..n {
                let v = vec(i, m);
                q[i * n + k] = v;
                norm += v * v;
            }
            let inv = 1.0 / norm.sqrt();
            for i in 0..n {
                q[i * n + k] *= inv;
            }
        }
        Self { n, q, lam }
    }

    /// Cell-centered unknowns with mirror ghosts at both ends.
    pub fn neumann_cell(cells: usize, h: f64) -> Self {
        Self::build(
            cells,
            h,
            |i, m| (m as f64 * PI * (i as f64 + 0.5) / cells as f64).cos(),
            |k| k,
            cells,
        )
    }

    /// Cell-centered unknowns, homogeneous Dirichlet at the end faces
    /// (ghost = -interior).
    pub fn dirichlet_cell(cells: usize, h: f64) -> Self {
        Self::build(
            cells,
            h,
            |i, m| (m as f64 * PI * (i as f64 + 0.5) / cells as f64).sin(),
            |k| k + 1,
            cells,
        )
    }

    /// Interior nodes `1..cells` with Dirichlet values at nodes `0` and `cells`.
    pub fn dirichlet_node(cells: usize, h: f64) -> Self {
        Self::build(
            cells - 1,
            h,
            |i, m| (m as f64 * PI * (i as f64 + 1.0) / cells as f64).sin(),
            |k| k + 1,
            cells,
        )
    }
}

/// Tensor-product solver on an `mx * my` row-major array (`j * mx + i`).
#[derive(Debug, Clone)]
pub struct Separable2d {
    pub bx: Basis1d,
    pub by: Basis1d,
}

impl Separable2d {
    pub fn new(bx: Basis1d, by: Basis1d) -> Self {
        Self { bx, by }
    }

    fn transform(&self, data: &[f64], forward: bool) -> Vec<f64> {
        let (mx, my) = (self.bx.n, self.by.n);
        let (qx, qy) = (&self.bx.q, &self.by.q);
        // along x: forward uses Q^T (sum over i), backward uses Q (sum over k)
        let mut t = vec![0.0; mx * my];
        exec::rows_mut(&mut t, mx, |j, row| {
            let src = &data[j * mx..(j + 1) * mx];
            for (k, out) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for (i, &v) in src.iter().enumerate() {
                    s += v * if forward {
                        qx[i * mx + k]
                    } else {
                        qx[k * mx + i]
                    };
                }
                *out = s;
            }
        });
        let mut r = vec![0.0; mx * my];
        exec::rows_mut(&mut r, mx, |l, row| {
            for j in 0..my {
                let w = if forward {
                    qy[j * my + l]
                } else {
                    qy[l * my + j]
                };
                if w == 0.0 {
                    continue;
                }
                let src = &t[j * mx..(j + 1) * mx];
                for (o, &v) in row.iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        });
        r
    }

    /// Solve `f(L) x = rhs` where `inv_symbol(lambda)` returns `1 / f(lambda)`
    /// or `None` for a null mode (that component of the solution is zeroed).
    pub fn solve(&self, rhs: &[f64], inv_symbol: impl Fn(f64) -> Option<f64>) -> Vec<f64> {
        let (mx, my) = (self.bx.n, self.by.n);
        assert_eq!(rhs.len(), mx * my);
        let mut hat = self.transform(rhs, true);
        for l in 0..my {
            for k in 0..mx {
                let v = &mut hat[l * mx + k];
                *v = match inv_symbol(self.bx.lam[k] + self.by.lam[l]) {
                    Some(s) => *v * s,
                    None => 0.0,
                };
            }
        }
        self.transform(&hat, false)
    }
}
