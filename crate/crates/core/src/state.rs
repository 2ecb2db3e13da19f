//! Forward solver for the controlled Cahn-Hilliard-Navier-Stokes system,
//! the steady Stokes lifting solver, and trajectory diagnostics.

use crate::control::{BoundaryControl, WallData};
use crate::error::{Error, Result};
use crate::grid::{divergence, gradient_to_faces, Grid, ScalarField, VelocityField};
use crate::linalg;
use crate::potential::Potential;
use crate::scheme::Scheme;

/// Simulation parameters.
///
/// Stability: diffusion and the Cahn-Hilliard fourth-order term are implicit,
/// so the step is limited only by the explicit convection,
/// `dt <= dt_max = min(h / (2 U), 2 nu / U^2)` for a velocity scale `U`
/// (see [`SimConfig::dt_max`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: Grid,
    pub nu: f64,
    pub t_final: f64,
    pub dt: f64,
    pub div_tol: f64,
    pub lin_tol: f64,
    /// Test-only switch: disables both momentum convection and phase transport.
    pub convection: bool,
}

impl SimConfig {
    pub fn new(grid: Grid, nu: f64, t_final: f64, dt: f64) -> Self {
        Self {
            grid,
            nu,
            t_final,
            dt,
            div_tol: 1e-10,
            lin_tol: 1e-10,
            convection: true,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Explicit-convection bound for velocity scale `u_scale`.
    pub fn dt_max(grid: &Grid, nu: f64, u_scale: f64) -> f64 {
        let h = grid.hx.min(grid.hy);
        let u = u_scale.max(1e-12);
        (0.5 * h / u).min(2.0 * nu / (u * u))
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = vec![];
        if !(self.nu > 0.0) {
            errs.push(format!("physics.nu must be positive, got {}", self.nu));
        }
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            errs.push("time.dt and time.T must be positive".to_string());
        } else {
            let m = self.t_final / self.dt;
            if (m - m.round()).abs() > 1e-9 * m.max(1.0) || m.round() < 1.0 {
                errs.push(format!("time.dt must divide time.T (T/dt = {m})"));
            }
        }
        if !(self.div_tol > 0.0) || !(self.lin_tol > 0.0) {
            errs.push("solver tolerances must be positive".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Control with zero data on this config's time grid.
    pub fn zero_control(&self) -> BoundaryControl {
        BoundaryControl::zeros(self.grid, self.dt, self.steps())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: VelocityField,
    pub phi: ScalarField,
    pub mu: ScalarField,
    pub pi: ScalarField,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
    pub control: BoundaryControl,
}

impl Trajectory {
    pub fn grid(&self) -> Grid {
        self.states[0].phi.grid
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory has at least the initial state")
    }

    pub fn check_complete(&self) -> Result<()> {
        if self.states.len() != self.control.n_nodes() {
            return Err(Error::TrajectoryIncomplete(format!(
                "{} states for {} control nodes",
                self.states.len(),
                self.control.n_nodes()
            )));
        }
        Ok(())
    }
}

/// Control-to-state map: run the scheme over the control's time nodes.
pub fn solve_forward(
    u0: &VelocityField,
    phi0: &ScalarField,
    h: &BoundaryControl,
    cfg: &SimConfig,
    pot: &Potential,
) -> Result<Trajectory> {
    let scheme = Scheme::new(cfg, *pot);
    solve_forward_with(&scheme, u0, phi0, h)
}

/// [`solve_forward`] with a prebuilt scheme (reused across many solves).
pub fn solve_forward_with(
    scheme: &Scheme,
    u0: &VelocityField,
    phi0: &ScalarField,
    h: &BoundaryControl,
) -> Result<Trajectory> {
    h.validate()?;
    if h.steps() == 0 || (h.dt() - scheme.dt).abs() > 1e-12 * scheme.dt {
        return Err(Error::TimeNodeMismatch(format!(
            "control step {} vs scheme step {}",
            h.dt(),
            scheme.dt
        )));
    }
    u0.validate()?;
    phi0.validate()?;
    h.check_initial(u0, 1e-10)?;

    let mut u = u0.clone();
    let mut wall = h.wall(0);
    wall.impose_normal(&mut u);
    let s0 = State {
        t: h.time_nodes[0],
        mu: scheme.chemical_potential(phi0),
        phi: phi0.clone(),
        pi: ScalarField::zeros(scheme.grid),
        u,
    };
    let mut states = Vec::with_capacity(h.n_nodes());
    states.push(s0);
    for k in 0..h.steps() {
        let next_wall = h.wall(k + 1);
        let mut s = scheme.step(&states[k], &wall, &next_wall)?;
        s.t = h.time_nodes[k + 1];
        states.push(s);
        wall = next_wall;
    }
    Ok(Trajectory {
        dt: scheme.dt,
        states,
        control: h.clone(),
    })
}

/// Steady Stokes lifting: `-lap(u) + grad(pi) = 0`, `div u = 0`, `u = h` on
/// the boundary. Solved by conjugate gradients on the pressure Schur
/// complement with direct velocity solves.
pub fn solve_steady_stokes(wall: &WallData, cfg: &SimConfig) -> Result<VelocityField> {
    let g = cfg.grid;
    let scheme = Scheme::new(cfg, Potential::default());
    let flux: f64 = wall
        .ux_right
        .iter()
        .zip(&wall.ux_left)
        .map(|(r, l)| (r - l) * g.hy)
        .sum::<f64>()
        + wall
            .uy_top
            .iter()
            .zip(&wall.uy_bottom)
            .map(|(t, b)| (t - b) * g.hx)
            .sum::<f64>();
    let scale: f64 = wall
        .ux_right
        .iter()
        .chain(&wall.ux_left)
        .chain(&wall.uy_top)
        .chain(&wall.uy_bottom)
        .map(|v| v.abs())
        .sum();
    if flux.abs() > 1e-12 * scale.max(1.0) * g.hx.max(g.hy) {
        return Err(Error::CompatibilityViolation(format!(
            "lifting data has net flux {flux:.3e}"
        )));
    }
    let a_inv = |f: &VelocityField| scheme.velocity_solve(f, |l| 1.0 / l);
    let zero = VelocityField::zeros(g);
    let bd = scheme.velocity_laplacian(&zero, wall);
    let mut boundary_only = VelocityField::zeros(g);
    wall.impose_normal(&mut boundary_only);

    // u(pi) = A^{-1}(bd - G pi); require D u(pi) + D_b h = 0, i.e.
    // (G^T A^{-1} G) pi = -(D A^{-1} bd + D_b h) with G^T = -D on interior faces.
    let u_bd = a_inv(&bd);
    let mut r = divergence(&u_bd);
    r.axpy(1.0, &divergence(&boundary_only));
    let rhs: Vec<f64> = r.values.iter().map(|v| -v).collect();
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    let rhs: Vec<f64> = rhs.iter().map(|v| v - mean).collect();
    let apply = |p: &[f64]| -> Vec<f64> {
        let ps = ScalarField {
            grid: g,
            values: p.to_vec(),
        };
        let au = a_inv(&gradient_to_faces(&ps));
        let mut d = divergence(&au);
        d.scale(-1.0);
        let m = d.mean();
        d.values.iter().map(|v| v - m).collect()
    };
    let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pi = if norm_b == 0.0 {
        vec![0.0; g.n_cells()]
    } else {
        linalg::conjugate_gradient(apply, &rhs, cfg.lin_tol * 1e-3, 10 * g.n_cells()).map_err(
            |res| Error::LinearSolveFailure {
                what: "stokes schur complement",
                residual: res,
                tol: cfg.lin_tol,
            },
        )?
    };
    let pi = ScalarField {
        grid: g,
        values: pi,
    };
    let mut f = bd;
    f.axpy(-1.0, &gradient_to_faces(&pi));
    let mut u = a_inv(&f);
    wall.impose_normal(&mut u);
    let res = divergence(&u).max_abs();
    if res > cfg.div_tol {
        return Err(Error::LinearSolveFailure {
            what: "stokes divergence",
            residual: res,
            tol: cfg.div_tol,
        });
    }
    Ok(u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub kinetic_energy: f64,
    pub mixing_energy: f64,
    pub divergence_residual: f64,
}

/// Mixing energy `int 1/2 |grad phi|^2 + F(phi)` by midpoint quadrature.
pub fn mixing_energy(phi: &ScalarField, pot: &Potential) -> f64 {
    let g = phi.grid;
    let grad = gradient_to_faces(phi);
    0.5 * grad.dot(&grad) + g.cell_area() * phi.values.iter().map(|&p| pot.f_val(p)).sum::<f64>()
}

pub fn kinetic_energy(u: &VelocityField) -> f64 {
    0.5 * u.dot(u)
}

pub fn diagnostics(traj: &Trajectory, pot: &Potential) -> Vec<Diagnostics> {
    traj.states
        .iter()
        .map(|s| Diagnostics {
            t: s.t,
            mass: s.phi.sum() * s.phi.grid.cell_area(),
            kinetic_energy: kinetic_energy(&s.u),
            mixing_energy: mixing_energy(&s.phi, pot),
            divergence_residual: divergence(&s.u).max_abs(),
        })
        .collect()
}

/// Largest deviation between the prescribed tangential wall velocity and the
/// value extrapolated from the computed field (Chorin slip error).
pub fn max_slip(traj: &Trajectory) -> f64 {
    let mut m = 0.0f64;
    for (k, s) in traj.states.iter().enumerate().skip(1) {
        let (t, _) = crate::control::velocity_trace(&s.u);
        for (a, b) in t.values.iter().zip(&traj.control.tangential[k].values) {
            m = m.max((a - b).abs());
        }
    }
    m
}
