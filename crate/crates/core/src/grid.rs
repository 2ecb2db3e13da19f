//! Uniform staggered (MAC) grid on the rectangle `[0, lx] x [0, ly]`.
//!
//! Scalars (phase field, chemical potential, pressure) live at cell centers,
//! the two velocity components on the vertical and horizontal faces.
//! Storage is row-major with `j` (the y index) as the slow index:
//!
//! * scalar `(i, j)`  -> `j * nx + i`,        `i < nx`,  `j < ny`
//! * `ux`   `(i, j)`  -> `j * (nx + 1) + i`,  `i <= nx`, `j < ny`
//! * `uy`   `(i, j)`  -> `j * nx + i`,        `i < nx`,  `j <= ny`
//!
//! Boundary faces are numbered counterclockwise starting at the bottom-left
//! corner: bottom edge left to right, right edge bottom to top, top edge right
//! to left, left edge top to bottom.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

/// Geometry of one boundary face.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFace {
    pub edge: Edge,
    /// Position along the edge: `i` for bottom/top, `j` for left/right.
    pub index: usize,
    pub length: f64,
    /// Outward unit normal.
    pub normal: (f64, f64),
    /// Counterclockwise unit tangent.
    pub tangent: (f64, f64),
    pub center: (f64, f64),
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidGrid(format!(
                "need nx, ny >= 4, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
        })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_ux(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn n_uy(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn n_boundary(&self) -> usize {
        2 * (self.nx + self.ny)
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn fx(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn fy(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn xc(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.hx
    }

    pub fn yc(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.hy
    }

    pub fn xn(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn yn(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Boundary face number `k` in counterclockwise order.
    pub fn boundary_face(&self, k: usize) -> BoundaryFace {
        let (nx, ny) = (self.nx, self.ny);
        assert!(k < self.n_boundary(), "boundary face {k} out of range");
        if k < nx {
            let i = k;
            BoundaryFace {
                edge: Edge::Bottom,
                index: i,
                length: self.hx,
                normal: (0.0, -1.0),
                tangent: (1.0, 0.0),
                center: (self.xc(i), 0.0),
            }
        } else if k < nx + ny {
            let j = k - nx;
            BoundaryFace {
                edge: Edge::Right,
                index: j,
                length: self.hy,
                normal: (1.0, 0.0),
                tangent: (0.0, 1.0),
                center: (self.lx, self.yc(j)),
            }
        } else if k < 2 * nx + ny {
            let i = nx - 1 - (k - nx - ny);
            BoundaryFace {
                edge: Edge::Top,
                index: i,
                length: self.hx,
                normal: (0.0, 1.0),
                tangent: (-1.0, 0.0),
                center: (self.xc(i), self.ly),
            }
        } else {
            let j = ny - 1 - (k - 2 * nx - ny);
            BoundaryFace {
                edge: Edge::Left,
                index: j,
                length: self.hy,
                normal: (-1.0, 0.0),
                tangent: (0.0, -1.0),
                center: (0.0, self.yc(j)),
            }
        }
    }

    /// Inverse of [`Grid::boundary_face`].
    pub fn boundary_index(&self, edge: Edge, index: usize) -> usize {
        let (nx, ny) = (self.nx, self.ny);
        match edge {
            Edge::Bottom => index,
            Edge::Right => nx + index,
            Edge::Top => nx + ny + (nx - 1 - index),
            Edge::Left => 2 * nx + ny + (ny - 1 - index),
        }
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = BoundaryFace> + '_ {
        (0..self.n_boundary()).map(|k| self.boundary_face(k))
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    if let Some(p) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("{name}[{p}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.xc(i), grid.yc(j)));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "scalar field needs {} values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.c(i, j)]
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("scalar", &self.values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|x| *x *= a);
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    /// Area-weighted inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.grid.cell_area()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Grid,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            ux: vec![0.0; grid.n_ux()],
            uy: vec![0.0; grid.n_uy()],
        }
    }

    /// Samples `f` at face centers; `f` returns `(u_x, u_y)`.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut u = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                u.ux[grid.fx(i, j)] = f(grid.xn(i), grid.yc(j)).0;
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                u.uy[grid.fy(i, j)] = f(grid.xc(i), grid.yn(j)).1;
            }
        }
        u
    }

    /// Discretely divergence-free field `(d psi/dy, -d psi/dx)` from a
    /// stream function sampled at grid nodes.
    pub fn from_stream(grid: Grid, psi: impl Fn(f64, f64) -> f64) -> Self {
        let mut u = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let (x, y0, y1) = (grid.xn(i), grid.yn(j), grid.yn(j + 1));
                u.ux[grid.fx(i, j)] = (psi(x, y1) - psi(x, y0)) / grid.hy;
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let (y, x0, x1) = (grid.yn(j), grid.xn(i), grid.xn(i + 1));
                u.uy[grid.fy(i, j)] = -(psi(x1, y) - psi(x0, y)) / grid.hx;
            }
        }
        u
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("ux", &self.ux)?;
        check_finite("uy", &self.uy)
    }

    pub fn axpy(&mut self, a: f64, other: &VelocityField) {
        for (x, y) in self.ux.iter_mut().zip(&other.ux) {
            *x += a * y;
        }
        for (x, y) in self.uy.iter_mut().zip(&other.uy) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.ux
            .iter_mut()
            .chain(self.uy.iter_mut())
            .for_each(|x| *x *= a);
    }

    /// Area-weighted inner product over interior faces only. Boundary faces
    /// carry prescribed data and are not degrees of freedom.
    pub fn dot(&self, other: &VelocityField) -> f64 {
        let g = self.grid;
        let mut s = 0.0;
        for j in 0..g.ny {
            for i in 1..g.nx {
                let k = g.fx(i, j);
                s += self.ux[k] * other.ux[k];
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let k = g.fy(i, j);
                s += self.uy[k] * other.uy[k];
            }
        }
        s * g.cell_area()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.ux
            .iter()
            .chain(&self.uy)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zero every boundary face value.
    pub fn clear_boundary(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.ux[g.fx(0, j)] = 0.0;
            self.ux[g.fx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.uy[g.fy(i, 0)] = 0.0;
            self.uy[g.fy(i, g.ny)] = 0.0;
        }
    }

    /// Velocity component normal to boundary face `k`, outward positive.
    pub fn boundary_normal(&self, k: usize) -> f64 {
        let g = self.grid;
        let f = g.boundary_face(k);
        match f.edge {
            Edge::Bottom => -self.uy[g.fy(f.index, 0)],
            Edge::Top => self.uy[g.fy(f.index, g.ny)],
            Edge::Left => -self.ux[g.fx(0, f.index)],
            Edge::Right => self.ux[g.fx(g.nx, f.index)],
        }
    }
}

/// One real per boundary face, in counterclockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_boundary()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&BoundaryFace) -> f64) -> Self {
        Self {
            grid,
            values: grid.boundary_faces().map(|b| f(&b)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.grid.n_boundary() {
            return Err(Error::ShapeMismatch(format!(
                "boundary trace needs {} values, got {}",
                self.grid.n_boundary(),
                self.values.len()
            )));
        }
        check_finite("trace", &self.values)
    }

    /// Face-length-weighted inner product.
    pub fn dot(&self, other: &BoundaryTrace) -> f64 {
        self.grid
            .boundary_faces()
            .zip(self.values.iter().zip(&other.values))
            .map(|(f, (a, b))| f.length * a * b)
            .sum()
    }

    /// `sum_k len_k * values_k`.
    pub fn integral(&self) -> f64 {
        self.grid
            .boundary_faces()
            .zip(&self.values)
            .map(|(f, v)| f.length * v)
            .sum()
    }
}

/// Five-point Laplacian with mirror (homogeneous Neumann) ghost cells.
pub fn laplacian_neumann(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
    let mut out = ScalarField::zeros(g);
    let v = &f.values;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = v[g.c(i, j)];
            let w = if i > 0 { v[g.c(i - 1, j)] } else { c };
            let e = if i + 1 < g.nx { v[g.c(i + 1, j)] } else { c };
            let s = if j > 0 { v[g.c(i, j - 1)] } else { c };
            let n = if j + 1 < g.ny { v[g.c(i, j + 1)] } else { c };
            out.values[g.c(i, j)] = ax * ((e - c) - (c - w)) + ay * ((n - c) - (c - s));
        }
    }
    out
}

/// Biharmonic as two Neumann Laplacians; the intermediate Laplacian also
/// carries a zero-flux closure.
pub fn bilaplacian_neumann(f: &ScalarField) -> ScalarField {
    laplacian_neumann(&laplacian_neumann(f))
}

/// Cell-centered MAC divergence, boundary faces included.
pub fn divergence(u: &VelocityField) -> ScalarField {
    let g = u.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.values[g.c(i, j)] = (u.ux[g.fx(i + 1, j)] - u.ux[g.fx(i, j)]) / g.hx
                + (u.uy[g.fy(i, j + 1)] - u.uy[g.fy(i, j)]) / g.hy;
        }
    }
    out
}

/// Face-normal differences on interior faces; boundary faces are set to zero.
pub fn gradient_to_faces(f: &ScalarField) -> VelocityField {
    let g = f.grid;
    let mut out = VelocityField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.ux[g.fx(i, j)] = (f.at(i, j) - f.at(i - 1, j)) / g.hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.uy[g.fy(i, j)] = (f.at(i, j) - f.at(i, j - 1)) / g.hy;
        }
    }
    out
}

/// One-sided second-order derivative at a wall from the three cell-center
/// samples at distances `d/2, 3d/2, 5d/2`. Returns the inward derivative.
#[inline]
fn inward_from_cells(f1: f64, f2: f64, f3: f64, d: f64) -> f64 {
    (-2.0 * f1 + 3.0 * f2 - f3) / d
}

/// Outward normal derivative of a cell-centered field at every boundary face.
///
/// The outward convention is used throughout: for `f = y` the bottom-wall
/// trace is `-1`.
pub fn normal_derivative_trace(f: &ScalarField) -> BoundaryTrace {
    let g = f.grid;
    BoundaryTrace::from_fn(g, |b| {
        let (nx, ny) = (g.nx, g.ny);
        let inward = match b.edge {
            Edge::Bottom => {
                inward_from_cells(f.at(b.index, 0), f.at(b.index, 1), f.at(b.index, 2), g.hy)
            }
            Edge::Top => inward_from_cells(
                f.at(b.index, ny - 1),
                f.at(b.index, ny - 2),
                f.at(b.index, ny - 3),
                g.hy,
            ),
            Edge::Left => {
                inward_from_cells(f.at(0, b.index), f.at(1, b.index), f.at(2, b.index), g.hx)
            }
            Edge::Right => inward_from_cells(
                f.at(nx - 1, b.index),
                f.at(nx - 2, b.index),
                f.at(nx - 3, b.index),
                g.hx,
            ),
        };
        -inward
    })
}

/// Value of a cell-centered field at each boundary face by constant
/// extrapolation from the adjacent cell.
pub fn boundary_cell_values(f: &ScalarField) -> BoundaryTrace {
    let g = f.grid;
    BoundaryTrace::from_fn(g, |b| match b.edge {
        Edge::Bottom => f.at(b.index, 0),
        Edge::Top => f.at(b.index, g.ny - 1),
        Edge::Left => f.at(0, b.index),
        Edge::Right => f.at(g.nx - 1, b.index),
    })
}

/// Outward normal derivatives of both velocity components at each boundary
/// face, given the wall values of the tangential component at grid nodes.
///
/// Both derivatives are the ones implied by the momentum scheme's wall
/// closure: the tangential component uses the reflected ghost `2w - a`
/// (derivative `2 (a - w) / d` at each bounding node, averaged to the face),
/// the face-normal component the first interior face. Exact for linear
/// profiles, first order otherwise.
pub fn velocity_normal_derivative_trace(
    u: &VelocityField,
    wall: &TangentialWall,
) -> (BoundaryTrace, BoundaryTrace) {
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    // inward derivative at a node from wall value w and the sample a at d/2
    let node = |w: f64, a: f64, d: f64| 2.0 * (a - w) / d;
    // inward derivative at a wall face from values at 0 and d
    let face = |f0: f64, f1: f64, d: f64| (f1 - f0) / d;

    let mut dx = BoundaryTrace::zeros(g);
    let mut dy = BoundaryTrace::zeros(g);
    for k in 0..g.n_boundary() {
        let b = g.boundary_face(k);
        let i = b.index;
        let (inx, iny) = match b.edge {
            Edge::Bottom => {
                let t = |n: usize| node(wall.bottom[n], u.ux[g.fx(n, 0)], g.hy);
                (
                    0.5 * (t(i) + t(i + 1)),
                    face(u.uy[g.fy(i, 0)], u.uy[g.fy(i, 1)], g.hy),
                )
            }
            Edge::Top => {
                let t = |n: usize| node(wall.top[n], u.ux[g.fx(n, ny - 1)], g.hy);
                (
                    0.5 * (t(i) + t(i + 1)),
                    face(u.uy[g.fy(i, ny)], u.uy[g.fy(i, ny - 1)], g.hy),
                )
            }
            Edge::Left => {
                let t = |n: usize| node(wall.left[n], u.uy[g.fy(0, n)], g.hx);
                (
                    face(u.ux[g.fx(0, i)], u.ux[g.fx(1, i)], g.hx),
                    0.5 * (t(i) + t(i + 1)),
                )
            }
            Edge::Right => {
                let t = |n: usize| node(wall.right[n], u.uy[g.fy(nx - 1, n)], g.hx);
                (
                    face(u.ux[g.fx(nx, i)], u.ux[g.fx(nx - 1, i)], g.hx),
                    0.5 * (t(i) + t(i + 1)),
                )
            }
        };
        dx.values[k] = -inx;
        dy.values[k] = -iny;
    }
    (dx, dy)
}

/// Wall values of the velocity component tangential to each edge, at the
/// grid nodes along that edge (`nx + 1` for bottom/top, `ny + 1` for
/// left/right). Bottom/top hold `u_x`, left/right hold `u_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialWall {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl TangentialWall {
    pub fn zeros(g: &Grid) -> Self {
        Self {
            bottom: vec![0.0; g.nx + 1],
            top: vec![0.0; g.nx + 1],
            left: vec![0.0; g.ny + 1],
            right: vec![0.0; g.ny + 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_scalar(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField {
            grid: g,
            values: (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn boundary_ordering_roundtrip() {
        let g = Grid::new(5, 7, 1.0, 2.0).unwrap();
        assert_eq!(g.n_boundary(), 24);
        for k in 0..g.n_boundary() {
            let f = g.boundary_face(k);
            assert_eq!(g.boundary_index(f.edge, f.index), k);
        }
        // counterclockwise: first face is bottom-left, last is left-bottom
        assert_eq!(g.boundary_face(0).center, (0.1, 0.0));
        let last = g.boundary_face(23);
        assert_eq!(last.edge, Edge::Left);
        assert_eq!(last.index, 0);
    }

    #[test]
    fn grid_rejects_small() {
        assert!(Grid::new(3, 8, 1.0, 1.0).is_err());
        assert!(Grid::new(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = Grid::new(8, 6, 2.0, 1.0).unwrap();
        let l = laplacian_neumann(&ScalarField::constant(g, 3.7));
        assert!(l.max_abs() == 0.0);
    }

    #[test]
    fn laplacian_spike_stencil() {
        let g = Grid::new(8, 8, 1.0, 2.0).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values[g.c(3, 4)] = 1.0;
        let l = laplacian_neumann(&f);
        let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
        assert!((l.at(3, 4) - (-2.0 * ax - 2.0 * ay)).abs() < 1e-9);
        assert!((l.at(2, 4) - ax).abs() < 1e-9);
        assert!((l.at(4, 4) - ax).abs() < 1e-9);
        assert!((l.at(3, 3) - ay).abs() < 1e-9);
        assert!((l.at(3, 5) - ay).abs() < 1e-9);
    }

    #[test]
    fn laplacian_cosine_converges_second_order() {
        let lx = 1.0;
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::new(n, n, lx, 1.0).unwrap();
            let f = ScalarField::from_fn(g, |x, _| (PI * x / lx).cos());
            let l = laplacian_neumann(&f);
            let exact = ScalarField::from_fn(g, |x, _| -(PI / lx).powi(2) * (PI * x / lx).cos());
            let mut d = l.clone();
            d.axpy(-1.0, &exact);
            errs.push(d.max_abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() <= 0.2, "order {order}");
        }
    }

    #[test]
    fn laplacian_sums_to_zero_and_is_linear() {
        let g = Grid::new(9, 7, 1.3, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_scalar(g, &mut rng);
        let h = random_scalar(g, &mut rng);
        let lf = laplacian_neumann(&f);
        let scale = lf.max_abs() * g.n_cells() as f64;
        assert!(lf.sum().abs() <= 1e-12 * scale);
        let mut comb = f.clone();
        comb.scale(2.5);
        comb.axpy(-0.5, &h);
        let mut lhs = laplacian_neumann(&comb);
        let mut rhs = lf.clone();
        rhs.scale(2.5);
        rhs.axpy(-0.5, &laplacian_neumann(&h));
        lhs.axpy(-1.0, &rhs);
        assert!(lhs.max_abs() <= 1e-12 * scale);
    }

    #[test]
    fn divergence_of_constant_and_linear_fields() {
        let g = Grid::new(8, 10, 1.0, 1.5).unwrap();
        assert!(divergence(&VelocityField::from_fn(g, |_, _| (0.3, -1.2))).max_abs() < 1e-13);
        assert!(divergence(&VelocityField::from_fn(g, |x, y| (x, -y))).max_abs() < 1e-12);
    }

    #[test]
    fn divergence_sine_converges() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::unit_square(n).unwrap();
            let d = divergence(&VelocityField::from_fn(g, |x, _| ((PI * x).sin(), 0.0)));
            let exact = ScalarField::from_fn(g, |x, _| PI * (PI * x).cos());
            let mut e = d.clone();
            e.axpy(-1.0, &exact);
            errs.push(e.max_abs());
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() <= 0.2, "order {order}");
        }
    }

    #[test]
    fn gradient_simple_fields() {
        let g = Grid::new(6, 5, 1.0, 1.0).unwrap();
        assert!(gradient_to_faces(&ScalarField::constant(g, 2.0)).max_abs() == 0.0);
        let gx = gradient_to_faces(&ScalarField::from_fn(g, |x, _| x));
        for j in 0..g.ny {
            for i in 1..g.nx {
                assert!((gx.ux[g.fx(i, j)] - 1.0).abs() < 1e-12);
            }
        }
        assert!(gx.uy.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_divergence_duality() {
        let g = Grid::new(11, 9, 1.7, 1.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let f = random_scalar(g, &mut rng);
            let mut u = VelocityField::zeros(g);
            u.ux.iter_mut()
                .chain(u.uy.iter_mut())
                .for_each(|v| *v = rng.gen_range(-1.0..1.0));
            u.clear_boundary();
            let lhs = gradient_to_faces(&f).dot(&u);
            let rhs = -f.dot(&divergence(&u));
            let scale = gradient_to_faces(&f).norm_l2() * u.norm_l2();
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn normal_trace_linear_and_quadratic() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        assert!(normal_derivative_trace(&ScalarField::constant(g, 5.0))
            .values
            .iter()
            .all(|v| v.abs() < 1e-12));
        let t = normal_derivative_trace(&ScalarField::from_fn(g, |_, y| y));
        for b in g.boundary_faces() {
            let k = g.boundary_index(b.edge, b.index);
            let expect = b.normal.1; // grad = (0, 1), outward derivative = n_y
            assert!(
                (t.values[k] - expect).abs() < 1e-12,
                "{:?} {}",
                b.edge,
                t.values[k]
            );
        }
        // quadratic profile: the one-sided formula is exact, so 0 at the bottom wall
        let t2 = normal_derivative_trace(&ScalarField::from_fn(g, |_, y| y * y));
        for i in 0..g.nx {
            assert!(t2.values[g.boundary_index(Edge::Bottom, i)].abs() < 1e-12);
        }
    }

    #[test]
    fn normal_trace_cubic_converges_second_order() {
        let mut errs = vec![];
        for n in [16, 32, 64] {
            let g = Grid::unit_square(n).unwrap();
            let t = normal_derivative_trace(&ScalarField::from_fn(g, |_, y| y * y * y + y));
            // outward at y = 0 is -(3y^2 + 1) = -1
            let e = (0..g.nx)
                .map(|i| (t.values[g.boundary_index(Edge::Bottom, i)] + 1.0).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() <= 0.2, "order {order}");
        }
    }

    #[test]
    fn velocity_trace_of_shear() {
        let g = Grid::new(8, 8, 1.0, 1.0).unwrap();
        // u = (y, 0): bottom outward derivative of u_x is -1, top +1
        let u = VelocityField::from_fn(g, |_, y| (y, 0.0));
        let mut wall = TangentialWall::zeros(&g);
        wall.top.iter_mut().for_each(|v| *v = 1.0);
        let (dx, dy) = velocity_normal_derivative_trace(&u, &wall);
        for i in 0..g.nx {
            assert!((dx.values[g.boundary_index(Edge::Bottom, i)] + 1.0).abs() < 1e-12);
            assert!((dx.values[g.boundary_index(Edge::Top, i)] - 1.0).abs() < 1e-12);
        }
        assert!(dy.values.iter().all(|v| v.abs() < 1e-12));
    }
}
