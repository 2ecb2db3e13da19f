//! Nonlinear stencils of the scheme as sparse bilinear forms.
//!
//! Every product term `out[o] += c * a[ia] * b[ib]` is stored once per grid.
//! The same table then gives the forward evaluation, both partial
//! linearizations, and their exact transposes, so the tangent and adjoint
//! solvers use precisely the operators of the forward step.

use crate::control::WallData;
use crate::grid::{Grid, ScalarField, VelocityField};

/// `out[o] += c * a[ia] * b[ib]` for every stored term.
#[derive(Debug, Clone, Default)]
pub struct Bilinear {
    out: Vec<u32>,
    coef: Vec<f64>,
    ia: Vec<u32>,
    ib: Vec<u32>,
}

impl Bilinear {
    fn push(&mut self, o: usize, c: f64, a: usize, b: usize) {
        self.out.push(o as u32);
        self.coef.push(c);
        self.ia.push(a as u32);
        self.ib.push(b as u32);
    }

    pub fn len(&self) -> usize {
        self.out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }

    /// `out += B(a, b)`.
    pub fn apply(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for t in 0..self.out.len() {
            out[self.out[t] as usize] +=
                self.coef[t] * a[self.ia[t] as usize] * b[self.ib[t] as usize];
        }
    }

    /// `adj_a += (d/da B(a, b))^T lambda`.
    pub fn transpose_a(&self, b: &[f64], lambda: &[f64], adj_a: &mut [f64]) {
        for t in 0..self.out.len() {
            adj_a[self.ia[t] as usize] +=
                self.coef[t] * b[self.ib[t] as usize] * lambda[self.out[t] as usize];
        }
    }

    /// `adj_b += (d/db B(a, b))^T lambda`.
    pub fn transpose_b(&self, a: &[f64], lambda: &[f64], adj_b: &mut [f64]) {
        for t in 0..self.out.len() {
            adj_b[self.ib[t] as usize] +=
                self.coef[t] * a[self.ia[t] as usize] * lambda[self.out[t] as usize];
        }
    }
}

/// Velocity extended with wall ghosts.
///
/// `ux` has `(nx + 1) x (ny + 2)` entries (ghost rows below and above),
/// `uy` has `(nx + 2) x (ny + 1)` (ghost columns left and right), stored as
/// one vector: `ux` block then `uy` block. Ghosts realize the tangential wall
/// value by linear reflection: `ghost = 2 w - interior`.
#[derive(Debug, Clone)]
pub struct ExtVel {
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExtLayout {
    nx: usize,
    ny: usize,
}

impl ExtLayout {
    pub fn new(g: &Grid) -> Self {
        Self { nx: g.nx, ny: g.ny }
    }

    pub fn len(&self) -> usize {
        (self.nx + 1) * (self.ny + 2) + (self.nx + 2) * (self.ny + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `ux` at face column `i` in `0..=nx`, row `j` in `-1..=ny`.
    #[inline]
    pub fn ux(&self, i: usize, j: isize) -> usize {
        (j + 1) as usize * (self.nx + 1) + i
    }

    /// `uy` at column `i` in `-1..=nx`, face row `j` in `0..=ny`.
    #[inline]
    pub fn uy(&self, i: isize, j: usize) -> usize {
        (self.nx + 1) * (self.ny + 2) + j * (self.nx + 2) + (i + 1) as usize
    }
}

impl ExtVel {
    pub fn build(u: &VelocityField, wall: &WallData) -> Self {
        let g = u.grid;
        let l = ExtLayout::new(&g);
        let (nx, ny) = (g.nx, g.ny);
        let mut d = vec![0.0; l.len()];
        for j in 0..ny {
            for i in 1..nx {
                d[l.ux(i, j as isize)] = u.ux[g.fx(i, j)];
            }
            d[l.ux(0, j as isize)] = wall.ux_left[j];
            d[l.ux(nx, j as isize)] = wall.ux_right[j];
        }
        for i in 0..=nx {
            d[l.ux(i, -1)] = 2.0 * wall.tangential.bottom[i] - d[l.ux(i, 0)];
            d[l.ux(i, ny as isize)] = 2.0 * wall.tangential.top[i] - d[l.ux(i, ny as isize - 1)];
        }
        for i in 0..nx {
            for j in 1..ny {
                d[l.uy(i as isize, j)] = u.uy[g.fy(i, j)];
            }
            d[l.uy(i as isize, 0)] = wall.uy_bottom[i];
            d[l.uy(i as isize, ny)] = wall.uy_top[i];
        }
        for j in 0..=ny {
            d[l.uy(-1, j)] = 2.0 * wall.tangential.left[j] - d[l.uy(0, j)];
            d[l.uy(nx as isize, j)] = 2.0 * wall.tangential.right[j] - d[l.uy(nx as isize - 1, j)];
        }
        Self { data: d }
    }

    /// Transpose of [`ExtVel::build`] restricted to interior faces: maps an
    /// adjoint on the extended layout back onto interior face values.
    pub fn adjoint_to_interior(g: &Grid, adj: &[f64]) -> VelocityField {
        let l = ExtLayout::new(g);
        let (nx, ny) = (g.nx, g.ny);
        let mut out = VelocityField::zeros(*g);
        for j in 0..ny {
            for i in 1..nx {
                let mut v = adj[l.ux(i, j as isize)];
                if j == 0 {
                    v -= adj[l.ux(i, -1)];
                }
                if j == ny - 1 {
                    v -= adj[l.ux(i, ny as isize)];
                }
                out.ux[g.fx(i, j)] = v;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let mut v = adj[l.uy(i as isize, j)];
                if i == 0 {
                    v -= adj[l.uy(-1, j)];
                }
                if i == nx - 1 {
                    v -= adj[l.uy(nx as isize, j)];
                }
                out.uy[g.fy(i, j)] = v;
            }
        }
        out
    }
}

/// Flat face index: `ux` block then `uy` block, matching [`VelocityField`].
#[inline]
fn face_x(g: &Grid, i: usize, j: usize) -> usize {
    g.fx(i, j)
}

#[inline]
fn face_y(g: &Grid, i: usize, j: usize) -> usize {
    g.n_ux() + g.fy(i, j)
}

/// Split a flat face vector into a [`VelocityField`].
pub fn faces_to_field(g: &Grid, flat: &[f64]) -> VelocityField {
    VelocityField {
        grid: *g,
        ux: flat[..g.n_ux()].to_vec(),
        uy: flat[g.n_ux()..].to_vec(),
    }
}

pub fn field_to_faces(u: &VelocityField) -> Vec<f64> {
    let mut v = u.ux.clone();
    v.extend_from_slice(&u.uy);
    v
}

/// Advective form `(a . grad) b` at interior faces, central differences,
/// with `a` and `b` both on the extended layout. Output on flat faces.
pub fn convection_form(g: &Grid) -> Bilinear {
    let l = ExtLayout::new(g);
    let (nx, ny) = (g.nx, g.ny);
    let (cx, cy) = (0.5 / g.hx, 0.5 / g.hy);
    let mut b = Bilinear::default();
    for j in 0..ny {
        for i in 1..nx {
            let o = face_x(g, i, j);
            let ji = j as isize;
            let me = l.ux(i, ji);
            b.push(o, cx, me, l.ux(i + 1, ji));
            b.push(o, -cx, me, l.ux(i - 1, ji));
            // v averaged from the four surrounding uy faces
            for (ii, jj) in [(i - 1, j), (i, j), (i - 1, j + 1), (i, j + 1)] {
                let v = l.uy(ii as isize, jj);
                b.push(o, 0.25 * cy, v, l.ux(i, ji + 1));
                b.push(o, -0.25 * cy, v, l.ux(i, ji - 1));
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let o = face_y(g, i, j);
            let ii = i as isize;
            let me = l.uy(ii, j);
            b.push(o, cy, me, l.uy(ii, j + 1));
            b.push(o, -cy, me, l.uy(ii, j - 1));
            for (fi, fj) in [(i, j - 1), (i + 1, j - 1), (i, j), (i + 1, j)] {
                let u = l.ux(fi, fj as isize);
                b.push(o, 0.25 * cx, u, l.uy(ii + 1, j));
                b.push(o, -0.25 * cx, u, l.uy(ii - 1, j));
            }
        }
    }
    b
}

/// Capillary force `mu grad(phi)` at interior faces: face average of `mu`
/// times the face-normal difference of `phi`. `a = mu`, `b = phi` (cells).
pub fn capillary_form(g: &Grid) -> Bilinear {
    let (nx, ny) = (g.nx, g.ny);
    let mut b = Bilinear::default();
    for j in 0..ny {
        for i in 1..nx {
            let o = face_x(g, i, j);
            let (l, r) = (g.c(i - 1, j), g.c(i, j));
            let c = 0.5 / g.hx;
            for m in [l, r] {
                b.push(o, c, m, r);
                b.push(o, -c, m, l);
            }
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let o = face_y(g, i, j);
            let (s, n) = (g.c(i, j - 1), g.c(i, j));
            let c = 0.5 / g.hy;
            for m in [s, n] {
                b.push(o, c, m, n);
                b.push(o, -c, m, s);
            }
        }
    }
    b
}

/// Conservative transport `div(a phi)` at cells with central face values of
/// `phi` on interior faces and the adjacent cell value on boundary faces.
/// `a` is on the extended layout (boundary faces carry the wall normal
/// velocity), `b = phi`. When `div a = 0` this is `a . grad(phi)`; with zero
/// normal wall velocity it sums to zero exactly, so `phi` mass is conserved.
pub fn transport_form(g: &Grid) -> Bilinear {
    let l = ExtLayout::new(g);
    let (nx, ny) = (g.nx, g.ny);
    let mut b = Bilinear::default();
    let (ax, ay) = (1.0 / g.hx, 1.0 / g.hy);
    for j in 0..ny {
        for i in 0..=nx {
            let f = l.ux(i, j as isize);
            // flux through x-face i leaves cell i-1 and enters cell i
            let mut upd = |cell: usize, sign: f64| {
                if i == 0 {
                    b.push(cell, sign * ax, f, g.c(0, j));
                } else if i == nx {
                    b.push(cell, sign * ax, f, g.c(nx - 1, j));
                } else {
                    b.push(cell, sign * 0.5 * ax, f, g.c(i - 1, j));
                    b.push(cell, sign * 0.5 * ax, f, g.c(i, j));
                }
            };
            if i > 0 {
                upd(g.c(i - 1, j), 1.0);
            }
            if i < nx {
                upd(g.c(i, j), -1.0);
            }
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let f = l.uy(i as isize, j);
            let mut upd = |cell: usize, sign: f64| {
                if j == 0 {
                    b.push(cell, sign * ay, f, g.c(i, 0));
                } else if j == ny {
                    b.push(cell, sign * ay, f, g.c(i, ny - 1));
                } else {
                    b.push(cell, sign * 0.5 * ay, f, g.c(i, j - 1));
                    b.push(cell, sign * 0.5 * ay, f, g.c(i, j));
                }
            };
            if j > 0 {
                upd(g.c(i, j - 1), 1.0);
            }
            if j < ny {
                upd(g.c(i, j), -1.0);
            }
        }
    }
    b
}

/// All grid-dependent nonlinear stencils.
#[derive(Debug, Clone)]
pub struct Stencils {
    pub layout: ExtLayout,
    pub convection: Bilinear,
    pub capillary: Bilinear,
    pub transport: Bilinear,
}

impl Stencils {
    pub fn new(g: &Grid) -> Self {
        Self {
            layout: ExtLayout::new(g),
            convection: convection_form(g),
            capillary: capillary_form(g),
            transport: transport_form(g),
        }
    }
}

/// `mu grad(phi)` as a velocity field (interior faces).
pub fn capillary_force(st: &Stencils, mu: &ScalarField, phi: &ScalarField) -> VelocityField {
    let g = mu.grid;
    let mut out = vec![0.0; g.n_ux() + g.n_uy()];
    st.capillary.apply(&mu.values, &phi.values, &mut out);
    faces_to_field(&g, &out)
}

/// `(u . grad) u` as a velocity field (interior faces).
pub fn convection(st: &Stencils, u: &ExtVel, g: &Grid) -> VelocityField {
    let mut out = vec![0.0; g.n_ux() + g.n_uy()];
    st.convection.apply(&u.data, &u.data, &mut out);
    faces_to_field(g, &out)
}

/// `div(u phi)` at cells.
pub fn transport(st: &Stencils, u: &ExtVel, phi: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(phi.grid);
    st.transport.apply(&u.data, &phi.values, &mut out.values);
    out
}
