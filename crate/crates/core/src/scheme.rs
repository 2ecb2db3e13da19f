//! One time step of the splitting scheme, its exact linearization, and the
//! transpose of that linearization.
//!
//! Forward step `n -> n+1`:
//!
//! 1. Cahn-Hilliard, stabilized semi-implicit:
//!    `(phi' - phi)/dt + div(u phi) = lap(mu')`,
//!    `mu' = -lap(phi') + F'(phi) + S (phi' - phi)`, Neumann closures.
//! 2. Tentative velocity with implicit diffusion and explicit convection
//!    and capillary force: `(u~ - u)/dt - nu lap(u~) = mu' grad(phi) - (u.grad)u`,
//!    Dirichlet data from the next control slice.
//! 3. Projection: `lap(pi) = div(u~)/dt` with Neumann closure,
//!    `u' = u~ - dt grad(pi)`, `pi` zero-mean.
//!
//! All linear solves are direct (separable eigenbases), so the tangent and
//! transposed steps reuse the same factorizations.

use crate::control::WallData;
use crate::error::{Error, Result};
use crate::fastsolve::{Basis1d, Separable2d};
use crate::grid::{
    divergence, gradient_to_faces, laplacian_neumann, Grid, ScalarField, VelocityField,
};
use crate::ops::{
    capillary_force, convection, faces_to_field, field_to_faces, transport, ExtVel, Stencils,
};
use crate::potential::Potential;
use crate::state::{SimConfig, State};

/// Norm above which a run is declared unstable.
pub const BLOWUP_GUARD: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct Scheme {
    pub grid: Grid,
    pub nu: f64,
    pub dt: f64,
    pub pot: Potential,
    pub convection: bool,
    pub lin_tol: f64,
    pub div_tol: f64,
    pub stencils: Stencils,
    cell: Separable2d,
    ux_solver: Separable2d,
    uy_solver: Separable2d,
}

/// Output of one transposed step.
#[derive(Debug, Clone)]
pub struct AdjointStep {
    /// Adjoint of the velocity at the earlier time level.
    pub lam_u: VelocityField,
    /// Adjoint of the phase field at the earlier time level.
    pub lam_phi: ScalarField,
    /// Divergence-free projection of the incoming velocity adjoint.
    pub p: VelocityField,
    /// Pressure multiplier of that projection, zero mean.
    pub phat: ScalarField,
    /// `p` after the transposed implicit diffusion solve: the velocity
    /// adjoint at the start of the step.
    pub smoothed: VelocityField,
}

impl Scheme {
    pub fn new(cfg: &SimConfig, pot: Potential) -> Self {
        let g = cfg.grid;
        Self {
            grid: g,
            nu: cfg.nu,
            dt: cfg.dt,
            pot,
            convection: cfg.convection,
            lin_tol: cfg.lin_tol,
            div_tol: cfg.div_tol,
            stencils: Stencils::new(&g),
            cell: Separable2d::new(
                Basis1d::neumann_cell(g.nx, g.hx),
                Basis1d::neumann_cell(g.ny, g.hy),
            ),
            ux_solver: Separable2d::new(
                Basis1d::dirichlet_node(g.nx, g.hx),
                Basis1d::dirichlet_cell(g.ny, g.hy),
            ),
            uy_solver: Separable2d::new(
                Basis1d::dirichlet_cell(g.nx, g.hx),
                Basis1d::dirichlet_node(g.ny, g.hy),
            ),
        }
    }

    /// Max-norm bound of the discrete `-lap`.
    fn lap_norm(&self) -> f64 {
        4.0 / (self.grid.hx * self.grid.hx) + 4.0 / (self.grid.hy * self.grid.hy)
    }

    /// Normwise backward error check: `r <= tol (|A| |x| + |b|)`.
    fn check_residual(&self, what: &'static str, r: f64, scale: f64) -> Result<()> {
        let rel = r / scale.max(1e-300);
        if !(rel <= self.lin_tol) && r > 1e-300 {
            return Err(Error::LinearSolveFailure {
                what,
                residual: rel,
                tol: self.lin_tol,
            });
        }
        Ok(())
    }

    /// Solve `(I + dt lap^2 - dt S lap) x = rhs` (Neumann).
    pub fn ch_solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let (dt, s) = (self.dt, self.pot.stabilization);
        let x = self
            .cell
            .solve(&rhs.values, |l| Some(1.0 / (1.0 + dt * l * l + dt * s * l)));
        let x = ScalarField {
            grid: self.grid,
            values: x,
        };
        let lap = laplacian_neumann(&x);
        let bil = laplacian_neumann(&lap);
        let r = (0..x.values.len())
            .map(|k| {
                (x.values[k] + dt * bil.values[k] - dt * s * lap.values[k] - rhs.values[k]).abs()
            })
            .fold(0.0, f64::max);
        let l = self.lap_norm();
        let scale = (1.0 + dt * l * l + dt * s.abs() * l) * x.max_abs() + rhs.max_abs();
        self.check_residual("cahn-hilliard", r, scale)?;
        Ok(x)
    }

    /// Solve `-lap(q) = rhs` (Neumann) for zero-mean `q`; the mean of `rhs`
    /// is discarded.
    pub fn poisson_solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let floor = 1e-9
            * self
                .cell
                .bx
                .lam
                .last()
                .copied()
                .unwrap_or(1.0)
                .min(self.cell.by.lam.last().copied().unwrap_or(1.0));
        let q = self.cell.solve(
            &rhs.values,
            |l| if l > floor { Some(1.0 / l) } else { None },
        );
        let q = ScalarField {
            grid: self.grid,
            values: q,
        };
        let lap = laplacian_neumann(&q);
        let mean = rhs.mean();
        let r = (0..q.values.len())
            .map(|k| (-lap.values[k] - (rhs.values[k] - mean)).abs())
            .fold(0.0, f64::max);
        self.check_residual(
            "pressure poisson",
            r,
            self.lap_norm() * q.max_abs() + rhs.max_abs(),
        )?;
        Ok(q)
    }

    /// Velocity Laplacian at interior faces with wall data (boundary faces
    /// and ghost reflections).
    pub fn velocity_laplacian(&self, u: &VelocityField, wall: &WallData) -> VelocityField {
        let g = self.grid;
        let l = self.stencils.layout;
        let e = ExtVel::build(u, wall);
        let d = &e.data;
        let (ax, ay) = (1.0 / (g.hx * g.hx), 1.0 / (g.hy * g.hy));
        let mut out = VelocityField::zeros(g);
        for j in 0..g.ny {
            let jj = j as isize;
            for i in 1..g.nx {
                let c = d[l.ux(i, jj)];
                out.ux[g.fx(i, j)] = ax * (d[l.ux(i + 1, jj)] - 2.0 * c + d[l.ux(i - 1, jj)])
                    + ay * (d[l.ux(i, jj + 1)] - 2.0 * c + d[l.ux(i, jj - 1)]);
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let ii = i as isize;
                let c = d[l.uy(ii, j)];
                out.uy[g.fy(i, j)] = ax * (d[l.uy(ii + 1, j)] - 2.0 * c + d[l.uy(ii - 1, j)])
                    + ay * (d[l.uy(ii, j + 1)] - 2.0 * c + d[l.uy(ii, j - 1)]);
            }
        }
        out
    }

    /// Solve `f(L) x = rhs` on interior faces with homogeneous walls, where
    /// `L = -lap` and `inv` gives `1 / f`.
    pub fn velocity_solve(
        &self,
        rhs: &VelocityField,
        inv: impl Fn(f64) -> f64 + Copy,
    ) -> VelocityField {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut bx = Vec::with_capacity((nx - 1) * ny);
        for j in 0..ny {
            for i in 1..nx {
                bx.push(rhs.ux[g.fx(i, j)]);
            }
        }
        let mut by = Vec::with_capacity(nx * (ny - 1));
        for j in 1..ny {
            for i in 0..nx {
                by.push(rhs.uy[g.fy(i, j)]);
            }
        }
        let xx = self.ux_solver.solve(&bx, |l| Some(inv(l)));
        let xy = self.uy_solver.solve(&by, |l| Some(inv(l)));
        let mut out = VelocityField::zeros(g);
        for j in 0..ny {
            for i in 1..nx {
                out.ux[g.fx(i, j)] = xx[j * (nx - 1) + i - 1];
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                out.uy[g.fy(i, j)] = xy[(j - 1) * nx + i];
            }
        }
        out
    }

    /// Solve `(I - dt nu lap) x = rhs` on interior faces, homogeneous walls.
    pub fn diffusion_solve(&self, rhs: &VelocityField) -> Result<VelocityField> {
        let c = self.dt * self.nu;
        let x = self.velocity_solve(rhs, |l| 1.0 / (1.0 + c * l));
        let zero = WallData::zeros(&self.grid);
        let lap = self.velocity_laplacian(&x, &zero);
        let mut r = 0.0f64;
        let g = self.grid;
        for j in 0..g.ny {
            for i in 1..g.nx {
                let k = g.fx(i, j);
                r = r.max((x.ux[k] - c * lap.ux[k] - rhs.ux[k]).abs());
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                let k = g.fy(i, j);
                r = r.max((x.uy[k] - c * lap.uy[k] - rhs.uy[k]).abs());
            }
        }
        self.check_residual(
            "momentum diffusion",
            r,
            (1.0 + c * self.lap_norm()) * x.max_abs() + rhs.max_abs(),
        )?;
        Ok(x)
    }

    /// Project onto discretely divergence-free fields, keeping boundary
    /// faces. Returns the projected field and `q` with `u = v + grad(q)`.
    pub fn project(&self, v: &VelocityField) -> Result<(VelocityField, ScalarField)> {
        let div = divergence(v);
        let q = self.poisson_solve(&div)?;
        let mut u = v.clone();
        u.axpy(1.0, &gradient_to_faces(&q));
        let res = divergence(&u).max_abs();
        if res > self.div_tol {
            return Err(Error::LinearSolveFailure {
                what: "projection divergence",
                residual: res,
                tol: self.div_tol,
            });
        }
        Ok((u, q))
    }

    fn guard(&self, t: f64, fields: &[f64]) -> Result<()> {
        let m = fields.iter().fold(0.0f64, |m, v| {
            if v.is_nan() {
                f64::INFINITY
            } else {
                m.max(v.abs())
            }
        });
        if m > BLOWUP_GUARD {
            return Err(Error::StabilityBreach { t, norm: m });
        }
        Ok(())
    }

    /// Chemical potential consistent with `phi` alone: `-lap(phi) + F'(phi)`.
    pub fn chemical_potential(&self, phi: &ScalarField) -> ScalarField {
        let mut mu = laplacian_neumann(phi);
        mu.scale(-1.0);
        for (m, &p) in mu.values.iter_mut().zip(&phi.values) {
            *m += self.pot.f_d1(p);
        }
        mu
    }

    /// Advance `s` by one step. `wall_now` is the boundary data of `s`,
    /// `wall_next` that of the new level.
    pub fn step(&self, s: &State, wall_now: &WallData, wall_next: &WallData) -> Result<State> {
        let (g, dt, st) = (self.grid, self.dt, &self.stencils);
        let sc = self.pot.stabilization;
        let ue = ExtVel::build(&s.u, wall_now);

        let mut rhs = s.phi.clone();
        if self.convection {
            rhs.axpy(-dt, &transport(st, &ue, &s.phi));
        }
        let explicit = s.phi.map(|p| self.pot.f_d1(p) - sc * p);
        rhs.axpy(dt, &laplacian_neumann(&explicit));
        let phi = self.ch_solve(&rhs)?;

        let mut mu = laplacian_neumann(&phi);
        mu.scale(-1.0);
        for k in 0..mu.values.len() {
            mu.values[k] += self.pot.f_d1(s.phi.values[k]) + sc * (phi.values[k] - s.phi.values[k]);
        }

        let mut force = capillary_force(st, &mu, &s.phi);
        if self.convection {
            force.axpy(-1.0, &convection(st, &ue, &g));
        }
        let mut rhs_u = s.u.clone();
        rhs_u.axpy(dt, &force);
        rhs_u.axpy(
            dt * self.nu,
            &self.velocity_laplacian(&VelocityField::zeros(g), wall_next),
        );
        let mut ut = self.diffusion_solve(&rhs_u)?;
        wall_next.impose_normal(&mut ut);
        let (u, q) = self.project(&ut)?;
        // u = u~ - dt grad(pi)
        let pi = q.map(|v| -v / dt);
        let t = s.t + dt;
        self.guard(t, &u.ux)?;
        self.guard(t, &u.uy)?;
        self.guard(t, &phi.values)?;
        Ok(State { t, u, phi, mu, pi })
    }

    /// Exact linearization of [`Scheme::step`] about `base` (level `n`) with
    /// `base_next` (level `n+1`, supplies `mu'`). Returns `(du', dphi', dmu')`.
    #[allow(clippy::too_many_arguments)]
    pub fn tangent_step(
        &self,
        base: &State,
        base_next: &State,
        wall_now: &WallData,
        du: &VelocityField,
        dphi: &ScalarField,
        dwall_now: &WallData,
        dwall_next: &WallData,
    ) -> Result<(VelocityField, ScalarField, ScalarField)> {
        let (g, dt, st) = (self.grid, self.dt, &self.stencils);
        let sc = self.pot.stabilization;
        let ue = ExtVel::build(&base.u, wall_now);
        let due = ExtVel::build(du, dwall_now);

        let mut rhs = dphi.clone();
        if self.convection {
            let mut a = vec![0.0; g.n_cells()];
            st.transport.apply(&due.data, &base.phi.values, &mut a);
            st.transport.apply(&ue.data, &dphi.values, &mut a);
            for (r, v) in rhs.values.iter_mut().zip(&a) {
                *r -= dt * v;
            }
        }
        let coef: Vec<f64> = base
            .phi
            .values
            .iter()
            .map(|&p| self.pot.f_d2(p) - sc)
            .collect();
        let explicit = ScalarField {
            grid: g,
            values: coef.iter().zip(&dphi.values).map(|(c, d)| c * d).collect(),
        };
        rhs.axpy(dt, &laplacian_neumann(&explicit));
        let dphi1 = self.ch_solve(&rhs)?;

        let mut dmu = laplacian_neumann(&dphi1);
        dmu.scale(-1.0);
        for k in 0..dmu.values.len() {
            dmu.values[k] += coef[k] * dphi.values[k] + sc * dphi1.values[k];
        }

        let mut f = vec![0.0; g.n_ux() + g.n_uy()];
        st.capillary.apply(&dmu.values, &base.phi.values, &mut f);
        st.capillary
            .apply(&base_next.mu.values, &dphi.values, &mut f);
        if self.convection {
            let mut c = vec![0.0; f.len()];
            st.convection.apply(&due.data, &ue.data, &mut c);
            st.convection.apply(&ue.data, &due.data, &mut c);
            for (a, b) in f.iter_mut().zip(&c) {
                *a -= b;
            }
        }
        let mut rhs_u = du.clone();
        rhs_u.axpy(dt, &faces_to_field(&g, &f));
        rhs_u.axpy(
            dt * self.nu,
            &self.velocity_laplacian(&VelocityField::zeros(g), dwall_next),
        );
        let mut ut = self.diffusion_solve(&rhs_u)?;
        dwall_next.impose_normal(&mut ut);
        let (du1, _) = self.project(&ut)?;
        Ok((du1, dphi1, dmu))
    }

    /// Transpose of [`Scheme::tangent_step`] with respect to the interior
    /// state `(u, phi)`: given adjoints of level `n+1`, return those of
    /// level `n` (before the level-`n` source is added).
    pub fn adjoint_step(
        &self,
        base: &State,
        base_next: &State,
        wall_now: &WallData,
        lam_u: &VelocityField,
        lam_phi: &ScalarField,
    ) -> Result<AdjointStep> {
        let (g, dt, st) = (self.grid, self.dt, &self.stencils);
        let sc = self.pot.stabilization;
        let ue = ExtVel::build(&base.u, wall_now);

        let mut lam = lam_u.clone();
        lam.clear_boundary();
        let (p, qhat) = self.project(&lam)?;
        let lrhs = self.diffusion_solve(&p)?;
        let smoothed = lrhs.clone();
        let mut lu = lrhs.clone();
        let mut lf = field_to_faces(&lrhs);
        lf.iter_mut().for_each(|v| *v *= dt);

        let mut lmu = ScalarField::zeros(g);
        st.capillary
            .transpose_a(&base.phi.values, &lf, &mut lmu.values);
        let mut lphi = ScalarField::zeros(g);
        st.capillary
            .transpose_b(&base_next.mu.values, &lf, &mut lphi.values);

        let mut lext = vec![0.0; st.layout.len()];
        if self.convection {
            st.convection.transpose_a(&ue.data, &lf, &mut lext);
            st.convection.transpose_b(&ue.data, &lf, &mut lext);
            lext.iter_mut().for_each(|v| *v = -*v);
        }

        let coef: Vec<f64> = base
            .phi
            .values
            .iter()
            .map(|&p| self.pot.f_d2(p) - sc)
            .collect();
        let mut lphi1 = lam_phi.clone();
        let lap_mu = laplacian_neumann(&lmu);
        for k in 0..lphi1.values.len() {
            lphi1.values[k] += -lap_mu.values[k] + sc * lmu.values[k];
            lphi.values[k] += coef[k] * lmu.values[k];
        }
        let r = self.ch_solve(&lphi1)?;
        let lap_r = laplacian_neumann(&r);
        for k in 0..lphi.values.len() {
            lphi.values[k] += r.values[k] + dt * coef[k] * lap_r.values[k];
        }
        if self.convection {
            let la: Vec<f64> = r.values.iter().map(|v| -dt * v).collect();
            st.transport.transpose_a(&base.phi.values, &la, &mut lext);
            st.transport.transpose_b(&ue.data, &la, &mut lphi.values);
        }
        lu.axpy(1.0, &ExtVel::adjoint_to_interior(&g, &lext));
        lu.clear_boundary();
        let phat = qhat.map(|v| v / dt);
        Ok(AdjointStep {
            lam_u: lu,
            lam_phi: lphi,
            p,
            phat,
            smoothed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryTrace;
    use std::f64::consts::PI;

    fn setup() -> (Scheme, State, WallData) {
        let g = Grid::unit_square(10).unwrap();
        let cfg = SimConfig::new(g, 0.7, 0.01, 1e-3);
        let scheme = Scheme::new(&cfg, Potential::default());
        let phi = ScalarField::from_fn(g, |x, y| {
            0.4 * (PI * x).cos() * (PI * y).cos() + 0.2 * (2.0 * PI * x * y).sin()
        });
        let u = VelocityField::from_stream(g, |x, y| {
            0.3 * (PI * x).sin().powi(2) * (PI * y).sin().powi(2) + 0.1 * x * y
        });
        let mu = scheme.chemical_potential(&phi);
        let mut s = State {
            t: 0.0,
            u,
            phi,
            mu,
            pi: ScalarField::zeros(g),
        };
        let w = WallData::from_traces(
            &BoundaryTrace::from_fn(g, |f| 0.5 * (f.center.0 + 2.0 * f.center.1)),
            &normal_of(&s.u),
        );
        w.impose_normal(&mut s.u);
        (scheme, s, w)
    }

    fn normal_of(u: &VelocityField) -> BoundaryTrace {
        let g = u.grid;
        BoundaryTrace {
            grid: g,
            values: (0..g.n_boundary()).map(|k| u.boundary_normal(k)).collect(),
        }
    }

    fn wall_from(
        g: &Grid,
        t: impl Fn(&crate::grid::BoundaryFace) -> f64,
        n: impl Fn(&crate::grid::BoundaryFace) -> f64,
    ) -> WallData {
        WallData::from_traces(
            &BoundaryTrace::from_fn(*g, t),
            &BoundaryTrace::from_fn(*g, n),
        )
    }

    fn perturbation(g: &Grid) -> (VelocityField, ScalarField, WallData, WallData) {
        let du = VelocityField::from_stream(*g, |x, y| {
            0.2 * (PI * x).sin().powi(2) * (2.0 * PI * y).sin().powi(2)
        });
        let dphi = ScalarField::from_fn(*g, |x, y| (3.0 * x + y).sin() * 0.3);
        let dw0 = wall_from(g, |f| (f.center.0 * 3.0).cos() * f.center.1, |_| 0.0);
        let dw1 = wall_from(
            g,
            |f| (f.center.1 * 2.0).sin() + f.center.0,
            |f| {
                if f.normal.1 < -0.5 {
                    (2.0 * PI * f.center.0).sin()
                } else {
                    0.0
                }
            },
        );
        (du, dphi, dw0, dw1)
    }

    fn add_wall(a: &WallData, b: &WallData, e: f64) -> WallData {
        let mut w = a.clone();
        let f = |x: &mut Vec<f64>, y: &Vec<f64>| x.iter_mut().zip(y).for_each(|(p, q)| *p += e * q);
        f(&mut w.ux_left, &b.ux_left);
        f(&mut w.ux_right, &b.ux_right);
        f(&mut w.uy_bottom, &b.uy_bottom);
        f(&mut w.uy_top, &b.uy_top);
        f(&mut w.tangential.bottom, &b.tangential.bottom);
        f(&mut w.tangential.top, &b.tangential.top);
        f(&mut w.tangential.left, &b.tangential.left);
        f(&mut w.tangential.right, &b.tangential.right);
        w
    }

    #[test]
    fn step_keeps_divergence_and_mass() {
        let (scheme, s, w) = setup();
        let s1 = scheme.step(&s, &w, &w).unwrap();
        assert!(divergence(&s1.u).max_abs() < 1e-10);
        assert!((s1.phi.sum() - s.phi.sum()).abs() < 1e-11);
    }

    #[test]
    fn tangent_matches_central_difference() {
        let (scheme, s, w) = setup();
        let g = scheme.grid;
        let (du, dphi, dw0, dw1) = perturbation(&g);
        let w1 = w.clone();
        let base_next = scheme.step(&s, &w, &w1).unwrap();
        let (tu, tphi, _) = scheme
            .tangent_step(&s, &base_next, &w, &du, &dphi, &dw0, &dw1)
            .unwrap();
        let eps = 1e-6;
        let shifted = |e: f64| {
            let mut st = s.clone();
            st.u.axpy(e, &du);
            st.phi.axpy(e, &dphi);
            scheme
                .step(&st, &add_wall(&w, &dw0, e), &add_wall(&w1, &dw1, e))
                .unwrap()
        };
        let (p, m) = (shifted(eps), shifted(-eps));
        let mut fu = p.u.clone();
        fu.axpy(-1.0, &m.u);
        fu.scale(0.5 / eps);
        let mut fphi = p.phi.clone();
        fphi.axpy(-1.0, &m.phi);
        fphi.scale(0.5 / eps);
        let mut eu = fu.clone();
        eu.axpy(-1.0, &tu);
        let mut ep = fphi.clone();
        ep.axpy(-1.0, &tphi);
        assert!(
            eu.max_abs() <= 1e-6 * fu.max_abs().max(1.0),
            "u err {}",
            eu.max_abs()
        );
        assert!(
            ep.max_abs() <= 1e-6 * fphi.max_abs().max(1.0),
            "phi err {}",
            ep.max_abs()
        );
    }

    #[test]
    fn adjoint_step_is_transpose_of_tangent() {
        let (scheme, s, w) = setup();
        let g = scheme.grid;
        let (mut du, dphi, _, _) = perturbation(&g);
        du.clear_boundary();
        let zero = WallData::zeros(&g);
        let base_next = scheme.step(&s, &w, &w).unwrap();
        let (tu, tphi, _) = scheme
            .tangent_step(&s, &base_next, &w, &du, &dphi, &zero, &zero)
            .unwrap();
        let mut lu = VelocityField::from_fn(g, |x, y| ((2.0 * x - y).sin(), (x * y * 5.0).cos()));
        lu.clear_boundary();
        let lphi = ScalarField::from_fn(g, |x, y| (x + 4.0 * y).cos());
        let adj = scheme.adjoint_step(&s, &base_next, &w, &lu, &lphi).unwrap();
        let euclid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs =
            euclid(&lu.ux, &tu.ux) + euclid(&lu.uy, &tu.uy) + euclid(&lphi.values, &tphi.values);
        let rhs = euclid(&adj.lam_u.ux, &du.ux)
            + euclid(&adj.lam_u.uy, &du.uy)
            + euclid(&adj.lam_phi.values, &dphi.values);
        assert!(
            (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0),
            "{lhs} vs {rhs}"
        );
        assert!(divergence(&adj.p).max_abs() < 1e-10);
    }
}
