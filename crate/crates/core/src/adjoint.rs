//! Backward adjoint solver, tracking targets, and the boundary multipliers
//! that carry the adjoint information onto the control.

use crate::error::{Error, Result};
use crate::grid::{
    boundary_cell_values, normal_derivative_trace, velocity_normal_derivative_trace, BoundaryTrace,
    Grid, ScalarField, TangentialWall, VelocityField,
};
use crate::potential::Potential;
use crate::scheme::Scheme;
use crate::state::{SimConfig, Trajectory};

/// A field given either once for all times or once per time node.
#[derive(Debug, Clone, PartialEq)]
pub enum Series<T> {
    Constant(T),
    Nodes(Vec<T>),
}

impl<T> Series<T> {
    pub fn at(&self, k: usize) -> &T {
        match self {
            Series::Constant(v) => v,
            Series::Nodes(v) => &v[k],
        }
    }

    fn len_ok(&self, n: usize) -> bool {
        match self {
            Series::Constant(_) => true,
            Series::Nodes(v) => v.len() == n,
        }
    }

    fn items(&self) -> Vec<&T> {
        match self {
            Series::Constant(v) => vec![v],
            Series::Nodes(v) => v.iter().collect(),
        }
    }
}

/// Tracking targets of the cost functional.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub u_q: Series<VelocityField>,
    pub phi_q: Series<ScalarField>,
    pub u_omega: VelocityField,
    pub phi_omega: ScalarField,
}

impl Targets {
    pub fn zeros(g: Grid) -> Self {
        Self {
            u_q: Series::Constant(VelocityField::zeros(g)),
            phi_q: Series::Constant(ScalarField::zeros(g)),
            u_omega: VelocityField::zeros(g),
            phi_omega: ScalarField::zeros(g),
        }
    }

    /// Targets met exactly by `traj`.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let last = traj.final_state();
        Self {
            u_q: Series::Nodes(traj.states.iter().map(|s| s.u.clone()).collect()),
            phi_q: Series::Nodes(traj.states.iter().map(|s| s.phi.clone()).collect()),
            u_omega: last.u.clone(),
            phi_omega: last.phi.clone(),
        }
    }

    pub fn validate(&self, g: &Grid, n_nodes: usize) -> Result<()> {
        if !self.u_q.len_ok(n_nodes) || !self.phi_q.len_ok(n_nodes) {
            return Err(Error::ShapeMismatch(format!(
                "target series must have {n_nodes} time nodes"
            )));
        }
        let mut grids: Vec<Grid> = self.u_q.items().iter().map(|u| u.grid).collect();
        grids.extend(self.phi_q.items().iter().map(|p| p.grid));
        grids.push(self.u_omega.grid);
        grids.push(self.phi_omega.grid);
        if grids.iter().any(|x| x != g) {
            return Err(Error::ShapeMismatch(
                "target grid differs from the state grid".into(),
            ));
        }
        for u in self.u_q.items().into_iter().chain([&self.u_omega]) {
            u.validate()?;
        }
        for p in self.phi_q.items().into_iter().chain([&self.phi_omega]) {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointState {
    pub t: f64,
    pub p: VelocityField,
    pub zeta: ScalarField,
    pub phat: ScalarField,
}

fn velocity_mismatch(a: &VelocityField, b: &VelocityField) -> VelocityField {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.clear_boundary();
    d
}

fn scalar_mismatch(a: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d
}

/// Backward march from the terminal mismatch. The returned list runs from
/// `t = T` down to `t = 0`.
///
/// At each node the velocity adjoint is the divergence-free part of the
/// backward variable and `phat` the pressure multiplier of that projection;
/// at `t = T` this is the projected terminal mismatch.
pub fn solve_adjoint(
    base: &Trajectory,
    targets: &Targets,
    cfg: &SimConfig,
    pot: &Potential,
) -> Result<Vec<AdjointState>> {
    let scheme = Scheme::new(cfg, *pot);
    solve_adjoint_with(&scheme, base, targets)
}

pub fn solve_adjoint_with(
    scheme: &Scheme,
    base: &Trajectory,
    targets: &Targets,
) -> Result<Vec<AdjointState>> {
    base.check_complete()?;
    let g = base.grid();
    let m = base.steps();
    targets.validate(&g, m + 1)?;
    let dt = scheme.dt;
    let last = base.final_state();
    let mut lam_u = velocity_mismatch(&last.u, &targets.u_omega);
    let mut lam_phi = scalar_mismatch(&last.phi, &targets.phi_omega);
    let mut out = Vec::with_capacity(m + 1);
    for k in (0..m).rev() {
        let st = scheme.adjoint_step(
            &base.states[k],
            &base.states[k + 1],
            &base.control.wall(k),
            &lam_u,
            &lam_phi,
        )?;
        out.push(AdjointState {
            t: base.states[k + 1].t,
            p: st.p,
            zeta: lam_phi,
            phat: st.phat,
        });
        let s = &base.states[k];
        lam_u = st.lam_u;
        lam_u.axpy(dt, &velocity_mismatch(&s.u, targets.u_q.at(k)));
        lam_phi = st.lam_phi;
        lam_phi.axpy(dt, &scalar_mismatch(&s.phi, targets.phi_q.at(k)));
    }
    let (p, q) = scheme.project(&lam_u)?;
    out.push(AdjointState {
        t: base.states[0].t,
        p,
        zeta: lam_phi,
        phat: q.map(|v| v / dt),
    });
    Ok(out)
}

/// Boundary multipliers at one time node.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub t: f64,
    pub p1_x: BoundaryTrace,
    pub p1_y: BoundaryTrace,
    /// Outward normal flux of the phase multiplier.
    pub zeta1_flux: BoundaryTrace,
}

impl Multipliers {
    /// `p1` projected on the outward normal and the ccw tangent of each face.
    pub fn normal_tangential(&self) -> (BoundaryTrace, BoundaryTrace) {
        let g = self.p1_x.grid;
        let mut n = BoundaryTrace::zeros(g);
        let mut t = BoundaryTrace::zeros(g);
        for f in g.boundary_faces() {
            let k = g.boundary_index(f.edge, f.index);
            let (a, b) = (self.p1_x.values[k], self.p1_y.values[k]);
            n.values[k] = a * f.normal.0 + b * f.normal.1;
            t.values[k] = a * f.tangent.0 + b * f.tangent.1;
        }
        (n, t)
    }
}

/// `p1 = -phat n - nu dp/dn` per face, and the phase flux
/// `-d(p . grad phi)/dn`, at every node. `adj` is in backward order.
///
/// The multiplier at `t_k` acts on the control over `(t_{k-1}, t_k]`; its
/// wall derivative is taken from `(I - dt nu lap)^{-1} p(t_k)`, the adjoint
/// velocity carried back across that interval by the implicit step.
pub fn boundary_multipliers(
    adj: &[AdjointState],
    base: &Trajectory,
    scheme: &Scheme,
) -> Result<Vec<Multipliers>> {
    let m = base.steps();
    let zero = TangentialWall::zeros(&base.grid());
    adj.iter()
        .enumerate()
        .map(|(r, a)| {
            let g = a.p.grid;
            let ph = boundary_cell_values(&a.phat);
            let carried = scheme.diffusion_solve(&a.p)?;
            let (dx, dy) = velocity_normal_derivative_trace(&carried, &zero);
            let mut p1_x = BoundaryTrace::zeros(g);
            let mut p1_y = BoundaryTrace::zeros(g);
            for f in g.boundary_faces() {
                let k = g.boundary_index(f.edge, f.index);
                p1_x.values[k] = -ph.values[k] * f.normal.0 - scheme.nu * dx.values[k];
                p1_y.values[k] = -ph.values[k] * f.normal.1 - scheme.nu * dy.values[k];
            }
            let phi = &base.states[m - r].phi;
            let s = p_dot_grad(&a.p, phi);
            let mut zeta1_flux = normal_derivative_trace(&s);
            zeta1_flux.values.iter_mut().for_each(|v| *v = -*v);
            Ok(Multipliers {
                t: a.t,
                p1_x,
                p1_y,
                zeta1_flux,
            })
        })
        .collect()
}

/// `p . grad(phi)` at cell centers (face averages of `p`, central
/// differences of `phi` with mirrored ghosts).
fn p_dot_grad(p: &VelocityField, phi: &ScalarField) -> ScalarField {
    let g = phi.grid;
    let at = |i: isize, j: isize| {
        phi.at(
            i.clamp(0, g.nx as isize - 1) as usize,
            j.clamp(0, g.ny as isize - 1) as usize,
        )
    };
    let mut s = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (ii, jj) = (i as isize, j as isize);
            let px = 0.5 * (p.ux[g.fx(i, j)] + p.ux[g.fx(i + 1, j)]);
            let py = 0.5 * (p.uy[g.fy(i, j)] + p.uy[g.fy(i, j + 1)]);
            let gx = (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * g.hx);
            let gy = (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * g.hy);
            s.values[g.c(i, j)] = px * gx + py * gy;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::divergence;
    use crate::presets;
    use crate::state::solve_forward;
    use std::f64::consts::PI;

    fn lid_instance() -> (crate::presets::Problem, Trajectory) {
        let pb = presets::lid(12, 2.5e-3, 6).unwrap();
        let traj = solve_forward(&pb.u0, &pb.phi0, &pb.control, &pb.cfg, &pb.pot).unwrap();
        (pb, traj)
    }

    #[test]
    fn matched_targets_give_zero_adjoint() {
        let (pb, traj) = lid_instance();
        let adj = solve_adjoint(&traj, &Targets::from_trajectory(&traj), &pb.cfg, &pb.pot).unwrap();
        for a in &adj {
            assert!(
                a.p.max_abs() <= 1e-12 && a.zeta.max_abs() <= 1e-12 && a.phat.max_abs() <= 1e-12
            );
        }
    }

    #[test]
    fn invariants_and_terminal_data() {
        let (pb, traj) = lid_instance();
        let adj = solve_adjoint(&traj, &pb.targets, &pb.cfg, &pb.pot).unwrap();
        assert_eq!(adj.len(), traj.states.len());
        assert_eq!(adj[0].t, traj.final_state().t);
        assert_eq!(adj.last().unwrap().t, 0.0);
        for a in &adj {
            let mut b = a.p.clone();
            b.clear_boundary();
            assert_eq!(b, a.p);
            assert!(divergence(&a.p).max_abs() <= pb.cfg.div_tol);
            assert!(a.phat.mean().abs() <= 1e-12 * a.phat.max_abs().max(1.0));
        }
        let mut dphi = traj.final_state().phi.clone();
        dphi.axpy(-1.0, &pb.targets.phi_omega);
        assert_eq!(adj[0].zeta, dphi);
    }

    #[test]
    fn divergence_free_terminal_mismatch_is_kept_exactly() {
        let (pb, traj) = lid_instance();
        let g = traj.grid();
        let mut t = Targets::from_trajectory(&traj);
        let vortex =
            VelocityField::from_stream(g, |x, y| (PI * x).sin().powi(2) * (PI * y).sin().powi(2));
        t.u_omega.axpy(-1.0, &vortex);
        let adj = solve_adjoint(&traj, &t, &pb.cfg, &pb.pot).unwrap();
        let mut d = adj[0].p.clone();
        d.axpy(-1.0, &vortex);
        assert!(d.max_abs() <= 1e-12, "{}", d.max_abs());
    }

    #[test]
    fn superposition_in_targets() {
        let (pb, traj) = lid_instance();
        let ta = pb.targets.clone();
        let mut tb = Targets::from_trajectory(&traj);
        tb.phi_omega = presets::noise(traj.grid(), 0.3, 3);
        let mid = |a: &ScalarField, b: &ScalarField| {
            let mut c = a.clone();
            c.axpy(1.0, b);
            c.scale(0.5);
            c
        };
        let midv = |a: &VelocityField, b: &VelocityField| {
            let mut c = a.clone();
            c.axpy(1.0, b);
            c.scale(0.5);
            c
        };
        let n = traj.states.len();
        let tc = Targets {
            u_q: Series::Nodes((0..n).map(|k| midv(ta.u_q.at(k), tb.u_q.at(k))).collect()),
            phi_q: Series::Nodes(
                (0..n)
                    .map(|k| mid(ta.phi_q.at(k), tb.phi_q.at(k)))
                    .collect(),
            ),
            u_omega: midv(&ta.u_omega, &tb.u_omega),
            phi_omega: mid(&ta.phi_omega, &tb.phi_omega),
        };
        let solve = |t: &Targets| solve_adjoint(&traj, t, &pb.cfg, &pb.pot).unwrap();
        let (a, b, c) = (solve(&ta), solve(&tb), solve(&tc));
        for k in 0..n {
            let mut p = a[k].p.clone();
            p.axpy(1.0, &b[k].p);
            p.scale(0.5);
            p.axpy(-1.0, &c[k].p);
            let mut z = a[k].zeta.clone();
            z.axpy(1.0, &b[k].zeta);
            z.scale(0.5);
            z.axpy(-1.0, &c[k].zeta);
            assert!(p.max_abs() <= 1e-10 * c[k].p.max_abs().max(1e-300) + 1e-14);
            assert!(z.max_abs() <= 1e-10 * c[k].zeta.max_abs().max(1e-300) + 1e-14);
        }
    }

    #[test]
    fn cosine_mode_decays_like_the_modal_oracle() {
        let (n, dt, steps) = (16, 1e-4, 10);
        let pb = presets::rest(n, dt, steps).unwrap();
        let g = pb.cfg.grid;
        let traj = solve_forward(&pb.u0, &pb.phi0, &pb.control, &pb.cfg, &pb.pot).unwrap();
        let mode = ScalarField::from_fn(g, |x, _| (PI * x).cos());
        let mut t = Targets::zeros(g);
        t.phi_omega = mode.clone();
        let adj = solve_adjoint(&traj, &t, &pb.cfg, &pb.pot).unwrap();
        let lam = (2.0 - 2.0 * (PI / n as f64).cos()) / (g.hx * g.hx);
        let s = pb.pot.stabilization;
        let per_step = (1.0 + dt * lam * (4.0 + s)) / (1.0 + dt * lam * lam + dt * s * lam);
        for (r, a) in adj.iter().enumerate() {
            assert!(a.p.max_abs() == 0.0);
            let expect = -per_step.powi(r as i32);
            for (z, m) in a.zeta.values.iter().zip(&mode.values) {
                assert!((z - expect * m).abs() <= 1e-12);
            }
            let cont = -(-(lam * lam - 4.0 * lam) * (r as f64 * dt)).exp();
            assert!((expect - cont).abs() <= 1e-2 * cont.abs());
        }
    }

    fn scheme_for(pb: &crate::presets::Problem) -> Scheme {
        Scheme::new(&pb.cfg, pb.pot)
    }

    #[test]
    fn multipliers_of_zero_and_constant_pressure() {
        let (pb, traj) = lid_instance();
        let g = traj.grid();
        let sch = scheme_for(&pb);
        let zero: Vec<AdjointState> = traj
            .states
            .iter()
            .rev()
            .map(|s| AdjointState {
                t: s.t,
                p: VelocityField::zeros(g),
                zeta: ScalarField::zeros(g),
                phat: ScalarField::zeros(g),
            })
            .collect();
        for m in boundary_multipliers(&zero, &traj, &sch).unwrap() {
            assert!(m
                .p1_x
                .values
                .iter()
                .chain(&m.p1_y.values)
                .chain(&m.zeta1_flux.values)
                .all(|v| *v == 0.0));
        }
        let c = 0.75;
        let cst: Vec<AdjointState> = zero
            .iter()
            .map(|a| AdjointState {
                phat: ScalarField::constant(g, c),
                ..a.clone()
            })
            .collect();
        for m in boundary_multipliers(&cst, &traj, &sch).unwrap() {
            for f in g.boundary_faces() {
                let k = g.boundary_index(f.edge, f.index);
                assert_eq!(m.p1_x.values[k], -c * f.normal.0);
                assert_eq!(m.p1_y.values[k], -c * f.normal.1);
            }
        }
    }

    /// Independent evaluation of `-phat n - nu dp/dn` edge by edge.
    fn p1_oracle(a: &AdjointState, sch: &Scheme) -> (Vec<f64>, Vec<f64>) {
        let g = a.p.grid;
        let q = sch.diffusion_solve(&a.p).unwrap();
        let (nx, ny) = (g.nx, g.ny);
        let mut px = vec![0.0; g.n_boundary()];
        let mut py = vec![0.0; g.n_boundary()];
        // inward slopes: tangential 2a/d at each node (ghost -a), normal a/d
        let node_avg = |a0: f64, a1: f64, d: f64| (a0 + a1) / d;
        for i in 0..nx {
            let k = g.boundary_index(crate::grid::Edge::Bottom, i);
            let ph = a.phat.at(i, 0);
            px[k] = sch.nu * node_avg(q.ux[g.fx(i, 0)], q.ux[g.fx(i + 1, 0)], g.hy);
            py[k] = ph + sch.nu * q.uy[g.fy(i, 1)] / g.hy;
            let k = g.boundary_index(crate::grid::Edge::Top, i);
            let ph = a.phat.at(i, ny - 1);
            px[k] = sch.nu * node_avg(q.ux[g.fx(i, ny - 1)], q.ux[g.fx(i + 1, ny - 1)], g.hy);
            py[k] = -ph + sch.nu * q.uy[g.fy(i, ny - 1)] / g.hy;
        }
        for j in 0..ny {
            let k = g.boundary_index(crate::grid::Edge::Left, j);
            let ph = a.phat.at(0, j);
            py[k] = sch.nu * node_avg(q.uy[g.fy(0, j)], q.uy[g.fy(0, j + 1)], g.hx);
            px[k] = ph + sch.nu * q.ux[g.fx(1, j)] / g.hx;
            let k = g.boundary_index(crate::grid::Edge::Right, j);
            let ph = a.phat.at(nx - 1, j);
            py[k] = sch.nu * node_avg(q.uy[g.fy(nx - 1, j)], q.uy[g.fy(nx - 1, j + 1)], g.hx);
            px[k] = -ph + sch.nu * q.ux[g.fx(nx - 1, j)] / g.hx;
        }
        (px, py)
    }

    #[test]
    fn multipliers_match_independent_trace() {
        let (pb, traj) = lid_instance();
        let sch = scheme_for(&pb);
        let adj = solve_adjoint(&traj, &pb.targets, &pb.cfg, &pb.pot).unwrap();
        let mult = boundary_multipliers(&adj, &traj, &sch).unwrap();
        for (a, m) in adj.iter().zip(&mult) {
            let (px, py) = p1_oracle(a, &sch);
            let scale = px
                .iter()
                .chain(&py)
                .fold(0.0f64, |s, v| s.max(v.abs()))
                .max(1e-300);
            for k in 0..px.len() {
                assert!((px[k] - m.p1_x.values[k]).abs() <= 1e-10 * scale);
                assert!((py[k] - m.p1_y.values[k]).abs() <= 1e-10 * scale);
            }
        }
    }
}
