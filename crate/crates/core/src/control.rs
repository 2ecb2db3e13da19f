//! Time-dependent Dirichlet velocity data on the boundary.
//!
//! The control is stored per time node as a tangential and an outward-normal
//! trace. The solvers consume it as [`WallData`]: normal components on the
//! boundary faces of the MAC grid and tangential components at the grid
//! nodes along each edge (the ghost-cell locations).

use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Edge, Grid, TangentialWall, VelocityField};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryControl {
    pub grid: Grid,
    pub time_nodes: Vec<f64>,
    pub tangential: Vec<BoundaryTrace>,
    pub normal: Vec<BoundaryTrace>,
}

/// Boundary values consumed by the velocity stencils at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WallData {
    /// `u_x` on the left and right boundary faces (length `ny`).
    pub ux_left: Vec<f64>,
    pub ux_right: Vec<f64>,
    /// `u_y` on the bottom and top boundary faces (length `nx`).
    pub uy_bottom: Vec<f64>,
    pub uy_top: Vec<f64>,
    pub tangential: TangentialWall,
}

impl WallData {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            ux_left: vec![0.0; g.ny],
            ux_right: vec![0.0; g.ny],
            uy_bottom: vec![0.0; g.nx],
            uy_top: vec![0.0; g.nx],
            tangential: TangentialWall::zeros(g),
        }
    }

    /// Build from tangential and outward-normal traces. Linear in both.
    pub fn from_traces(tangential: &BoundaryTrace, normal: &BoundaryTrace) -> Self {
        let g = tangential.grid;
        let mut w = Self::zeros(&g);
        // tangential velocity component along the edge axis, per face
        let mut bottom = vec![0.0; g.nx];
        let mut top = vec![0.0; g.nx];
        let mut left = vec![0.0; g.ny];
        let mut right = vec![0.0; g.ny];
        for k in 0..g.n_boundary() {
            let f = g.boundary_face(k);
            let (t, n) = (tangential.values[k], normal.values[k]);
            let vx = t * f.tangent.0 + n * f.normal.0;
            let vy = t * f.tangent.1 + n * f.normal.1;
            match f.edge {
                Edge::Bottom => {
                    w.uy_bottom[f.index] = vy;
                    bottom[f.index] = vx;
                }
                Edge::Top => {
                    w.uy_top[f.index] = vy;
                    top[f.index] = vx;
                }
                Edge::Left => {
                    w.ux_left[f.index] = vx;
                    left[f.index] = vy;
                }
                Edge::Right => {
                    w.ux_right[f.index] = vx;
                    right[f.index] = vy;
                }
            }
        }
        faces_to_nodes(&bottom, &mut w.tangential.bottom);
        faces_to_nodes(&top, &mut w.tangential.top);
        faces_to_nodes(&left, &mut w.tangential.left);
        faces_to_nodes(&right, &mut w.tangential.right);
        w
    }

    /// Copy the normal components into the boundary faces of `u`.
    pub fn impose_normal(&self, u: &mut VelocityField) {
        let g = u.grid;
        for j in 0..g.ny {
            u.ux[g.fx(0, j)] = self.ux_left[j];
            u.ux[g.fx(g.nx, j)] = self.ux_right[j];
        }
        for i in 0..g.nx {
            u.uy[g.fy(i, 0)] = self.uy_bottom[i];
            u.uy[g.fy(i, g.ny)] = self.uy_top[i];
        }
    }
}

/// Interior nodes average their two neighbouring faces; corner nodes take
/// the single adjacent face.
fn faces_to_nodes(faces: &[f64], nodes: &mut [f64]) {
    let n = faces.len();
    nodes[0] = faces[0];
    nodes[n] = faces[n - 1];
    for i in 1..n {
        nodes[i] = 0.5 * (faces[i - 1] + faces[i]);
    }
}

/// Tangential and outward-normal traces of a velocity field. The normal part
/// is read from the boundary faces; the tangential part is linearly
/// extrapolated to the wall nodes from the two nearest samples and averaged
/// to face centers.
pub fn velocity_trace(u: &VelocityField) -> (BoundaryTrace, BoundaryTrace) {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let ext = |a: f64, b: f64| 1.5 * a - 0.5 * b;
    let mut t = BoundaryTrace::zeros(g);
    let mut n = BoundaryTrace::zeros(g);
    for k in 0..g.n_boundary() {
        let f = g.boundary_face(k);
        let i = f.index;
        n.values[k] = u.boundary_normal(k);
        let along = match f.edge {
            Edge::Bottom => {
                let e = |m: usize| ext(u.ux[g.fx(m, 0)], u.ux[g.fx(m, 1)]);
                0.5 * (e(i) + e(i + 1))
            }
            Edge::Top => {
                let e = |m: usize| ext(u.ux[g.fx(m, ny - 1)], u.ux[g.fx(m, ny - 2)]);
                0.5 * (e(i) + e(i + 1))
            }
            Edge::Left => {
                let e = |m: usize| ext(u.uy[g.fy(0, m)], u.uy[g.fy(1, m)]);
                0.5 * (e(i) + e(i + 1))
            }
            Edge::Right => {
                let e = |m: usize| ext(u.uy[g.fy(nx - 1, m)], u.uy[g.fy(nx - 2, m)]);
                0.5 * (e(i) + e(i + 1))
            }
        };
        // along is the x (bottom/top) or y (left/right) component
        t.values[k] = along * (f.tangent.0 + f.tangent.1);
    }
    (t, n)
}

impl BoundaryControl {
    pub fn zeros(grid: Grid, dt: f64, steps: usize) -> Self {
        let time_nodes = (0..=steps).map(|k| k as f64 * dt).collect();
        Self {
            grid,
            time_nodes,
            tangential: vec![BoundaryTrace::zeros(grid); steps + 1],
            normal: vec![BoundaryTrace::zeros(grid); steps + 1],
        }
    }

    /// Tangential-only control `g(face, t)` from a closure.
    pub fn tangential_from_fn(
        grid: Grid,
        dt: f64,
        steps: usize,
        f: impl Fn(&crate::grid::BoundaryFace, f64) -> f64,
    ) -> Self {
        let mut c = Self::zeros(grid, dt, steps);
        for (k, t) in c.time_nodes.clone().into_iter().enumerate() {
            c.tangential[k] = BoundaryTrace::from_fn(grid, |b| f(b, t));
        }
        c
    }

    pub fn n_nodes(&self) -> usize {
        self.time_nodes.len()
    }

    pub fn steps(&self) -> usize {
        self.time_nodes.len() - 1
    }

    pub fn dt(&self) -> f64 {
        if self.time_nodes.len() < 2 {
            return 0.0;
        }
        self.time_nodes[1] - self.time_nodes[0]
    }

    pub fn wall(&self, k: usize) -> WallData {
        WallData::from_traces(&self.tangential[k], &self.normal[k])
    }

    /// Trapezoid weight of node `k` in time integrals.
    pub fn time_weight(&self, k: usize) -> f64 {
        let dt = self.dt();
        if k == 0 || k + 1 == self.n_nodes() {
            0.5 * dt
        } else {
            dt
        }
    }

    /// `sum_k w_k <a_k, b_k>_{dOmega}`, both components.
    pub fn inner(&self, other: &BoundaryControl) -> f64 {
        (0..self.n_nodes())
            .map(|k| {
                self.time_weight(k)
                    * (self.tangential[k].dot(&other.tangential[k])
                        + self.normal[k].dot(&other.normal[k]))
            })
            .sum()
    }

    /// Discrete `L2(Sigma)` norm.
    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &BoundaryControl) {
        for k in 0..self.n_nodes() {
            for (x, y) in self.tangential[k]
                .values
                .iter_mut()
                .zip(&other.tangential[k].values)
            {
                *x += a * y;
            }
            for (x, y) in self.normal[k]
                .values
                .iter_mut()
                .zip(&other.normal[k].values)
            {
                *x += a * y;
            }
        }
    }

    pub fn scale(&mut self, a: f64) {
        for tr in self.tangential.iter_mut().chain(self.normal.iter_mut()) {
            tr.values.iter_mut().for_each(|v| *v *= a);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut c = self.clone();
        c.scale(a);
        c
    }

    pub fn max_abs(&self) -> f64 {
        self.tangential
            .iter()
            .chain(&self.normal)
            .flat_map(|t| t.values.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Net outward flux `sum_faces len * normal` at node `k`.
    pub fn net_flux(&self, k: usize) -> f64 {
        self.normal[k].integral()
    }

    pub fn same_nodes(&self, other: &BoundaryControl) -> Result<()> {
        let ok = self.n_nodes() == other.n_nodes()
            && self
                .time_nodes
                .iter()
                .zip(&other.time_nodes)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        if !ok {
            return Err(Error::TimeNodeMismatch(format!(
                "{} nodes vs {} nodes",
                self.n_nodes(),
                other.n_nodes()
            )));
        }
        Ok(())
    }

    /// Shape, finiteness and zero-net-flux checks.
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes() < 2
            || self.tangential.len() != self.n_nodes()
            || self.normal.len() != self.n_nodes()
        {
            return Err(Error::ShapeMismatch(
                "control needs one trace pair per time node (at least two)".into(),
            ));
        }
        for k in 0..self.n_nodes() {
            self.tangential[k].validate()?;
            self.normal[k].validate()?;
            let scale: f64 = self
                .grid
                .boundary_faces()
                .zip(&self.normal[k].values)
                .map(|(f, v)| f.length * v.abs())
                .sum();
            let flux = self.net_flux(k);
            if flux.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::CompatibilityViolation(format!(
                    "net boundary flux {flux:.3e} at t = {} must vanish for an incompressible flow",
                    self.time_nodes[k]
                )));
            }
        }
        Ok(())
    }

    /// Initial compatibility: `h(0)` must equal the trace of `u0`.
    pub fn check_initial(&self, u0: &VelocityField, tol: f64) -> Result<()> {
        let (t, n) = velocity_trace(u0);
        let dev = t
            .values
            .iter()
            .zip(&self.tangential[0].values)
            .chain(n.values.iter().zip(&self.normal[0].values))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if dev > tol {
            return Err(Error::CompatibilityViolation(format!(
                "control at t = 0 differs from the initial velocity trace by {dev:.3e} (> {tol:.1e})"
            )));
        }
        Ok(())
    }
}
