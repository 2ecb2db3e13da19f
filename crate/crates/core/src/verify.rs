//! Finite-difference and Taylor-remainder checks of the derivative and the
//! reduced gradient.

use crate::adjoint::solve_adjoint_with;
use crate::control::BoundaryControl;
use crate::error::Result;
use crate::exec;
use crate::grid::{Grid, ScalarField, VelocityField};
use crate::linearized::solve_linearized_with;
use crate::objective::reduced_gradient;
use crate::optimizer::Reduced;
use crate::presets::Problem;
use crate::scheme::Scheme;
use crate::state::{solve_forward_with, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const DEFAULT_EPS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorReport {
    pub eps_list: Vec<f64>,
    pub remainder_norms: Vec<f64>,
    /// Least-squares slope of `log r` against `log eps`; `None` when the
    /// remainders sit at roundoff and no order can be fitted.
    pub fitted_order: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionCheck {
    pub fd: f64,
    pub adjoint: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub eps: f64,
    pub directions: Vec<DirectionCheck>,
    pub worst_error: f64,
}

fn h1_seminorm_sq_scalar(f: &ScalarField) -> f64 {
    let g = f.grid;
    let (hx, hy) = (g.hx, g.hy);
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i + 1 < g.nx {
                s += ((f.at(i + 1, j) - f.at(i, j)) / hx).powi(2);
            }
            if j + 1 < g.ny {
                s += ((f.at(i, j + 1) - f.at(i, j)) / hy).powi(2);
            }
        }
    }
    s * hx * hy
}

fn h1_seminorm_sq_array(v: &[f64], w: usize, h: usize, hx: f64, hy: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..h {
        for i in 0..w {
            let a = v[j * w + i];
            if i + 1 < w {
                s += ((v[j * w + i + 1] - a) / hx).powi(2);
            }
            if j + 1 < h {
                s += ((v[(j + 1) * w + i] - a) / hy).powi(2);
            }
        }
    }
    s * hx * hy
}

fn h1_seminorm_sq_velocity(u: &VelocityField) -> f64 {
    let g = u.grid;
    h1_seminorm_sq_array(&u.ux, g.nx + 1, g.ny, g.hx, g.hy)
        + h1_seminorm_sq_array(&u.uy, g.nx, g.ny + 1, g.hx, g.hy)
}

/// Discrete `C(0,T; L2) ∩ L2(0,T; H1)` norm of a velocity/phase history.
pub fn w_norm(us: &[VelocityField], phis: &[ScalarField], dt: f64) -> f64 {
    let mut sup = 0.0f64;
    let mut int = 0.0;
    for (k, (u, p)) in us.iter().zip(phis).enumerate() {
        sup = sup.max((u.dot(u) + p.dot(p)).sqrt());
        let w = if k == 0 || k + 1 == us.len() {
            0.5 * dt
        } else {
            dt
        };
        int += w * (u.dot(u) + p.dot(p) + h1_seminorm_sq_velocity(u) + h1_seminorm_sq_scalar(p));
    }
    sup + int.sqrt()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn shifted(h: &BoundaryControl, eta: &BoundaryControl, eps: f64) -> BoundaryControl {
    let mut c = h.clone();
    c.axpy(eps, eta);
    c
}

fn forward(pb: &Problem, scheme: &Scheme, h: &BoundaryControl) -> Result<Trajectory> {
    solve_forward_with(scheme, &pb.u0, &pb.phi0, h)
}

/// Remainders `|S(h + eps eta) - S(h) - eps S'(h) eta|_W` over `eps_list`.
/// Requires `eta` to vanish at `t = 0`.
pub fn taylor_test(
    pb: &Problem,
    h: &BoundaryControl,
    eta: &BoundaryControl,
    eps_list: &[f64],
) -> Result<TaylorReport> {
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let base = forward(pb, &scheme, h)?;
    let lin = solve_linearized_with(&scheme, &base, eta)?;
    let dt = pb.cfg.dt;
    let lin_norm = w_norm(
        &lin.iter().map(|l| l.w.clone()).collect::<Vec<_>>(),
        &lin.iter().map(|l| l.psi.clone()).collect::<Vec<_>>(),
        dt,
    );
    let runs = exec::map(eps_list, |&eps| -> Result<f64> {
        let tr = forward(pb, &scheme, &shifted(h, eta, eps))?;
        let mut us = Vec::with_capacity(lin.len());
        let mut ps = Vec::with_capacity(lin.len());
        for ((s, b), l) in tr.states.iter().zip(&base.states).zip(&lin) {
            let mut u = s.u.clone();
            u.axpy(-1.0, &b.u);
            u.axpy(-eps, &l.w);
            let mut p = s.phi.clone();
            p.axpy(-1.0, &b.phi);
            p.axpy(-eps, &l.psi);
            us.push(u);
            ps.push(p);
        }
        Ok(w_norm(&us, &ps, dt))
    });
    let remainder_norms = runs.into_iter().collect::<Result<Vec<_>>>()?;
    // remainders at roundoff relative to the first-order term
    let degenerate = remainder_norms
        .iter()
        .zip(eps_list)
        .all(|(r, e)| *r <= 1e-9 * e * lin_norm || *r == 0.0);
    let fitted_order = if degenerate {
        None
    } else {
        let xs: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = remainder_norms
            .iter()
            .map(|r| r.max(f64::MIN_POSITIVE).ln())
            .collect();
        Some(ls_slope(&xs, &ys))
    };
    Ok(TaylorReport {
        eps_list: eps_list.to_vec(),
        remainder_norms,
        fitted_order,
        degenerate,
    })
}

/// Central difference `(J(h + eps eta) - J(h - eps eta)) / (2 eps)`.
pub fn fd_gradient(
    pb: &Problem,
    h: &BoundaryControl,
    eta: &BoundaryControl,
    eps: f64,
) -> Result<f64> {
    let red = Reduced::new(pb);
    let vals = exec::map(&[eps, -eps], |&e| {
        red.cost(&shifted(h, eta, e)).map(|c| c.total)
    });
    let mut it = vals.into_iter();
    let (jp, jm) = (
        it.next().expect("two values")?,
        it.next().expect("two values")?,
    );
    Ok((jp - jm) / (2.0 * eps))
}

/// Smooth random tangential direction vanishing at `t = 0`.
pub fn smooth_direction(g: Grid, dt: f64, steps: usize, rng: &mut impl Rng) -> BoundaryControl {
    let mut c = [[0.0; 3]; 3];
    c.iter_mut()
        .flatten()
        .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    let (a, w) = (rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.0));
    let t_final = dt * steps as f64;
    BoundaryControl::tangential_from_fn(g, dt, steps, |f, t| {
        let (x, y) = (f.center.0 / g.lx, f.center.1 / g.ly);
        let mut s = 0.0;
        for (p, row) in c.iter().enumerate() {
            for (q, v) in row.iter().enumerate() {
                s += v * (p as f64 * PI * x).cos() * (q as f64 * PI * y).cos();
            }
        }
        let tau = t / t_final;
        s * (0.5 * PI * tau).sin() * (1.0 + a * (w * PI * tau).cos())
    })
}

/// Compare `<g, eta>` against central differences along `n_dirs` smooth
/// random directions.
pub fn gradcheck(
    pb: &Problem,
    h: &BoundaryControl,
    n_dirs: usize,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let red = Reduced::new(pb);
    let (_, grad) = red.cost_and_gradient(h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<BoundaryControl> = (0..n_dirs)
        .map(|_| smooth_direction(h.grid, h.dt(), h.steps(), &mut rng))
        .collect();
    let checks = exec::map(&dirs, |eta| -> Result<DirectionCheck> {
        let jp = red.cost(&shifted(h, eta, eps))?.total;
        let jm = red.cost(&shifted(h, eta, -eps))?.total;
        let fd = (jp - jm) / (2.0 * eps);
        let adjoint = grad.inner(eta);
        let scale = fd.abs().max(adjoint.abs());
        let rel_error = if scale == 0.0 {
            0.0
        } else {
            (fd - adjoint).abs() / scale
        };
        Ok(DirectionCheck {
            fd,
            adjoint,
            rel_error,
        })
    });
    let directions = checks.into_iter().collect::<Result<Vec<_>>>()?;
    let worst_error = directions.iter().map(|d| d.rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        eps,
        directions,
        worst_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityReport {
    /// Mismatch data paired with the linearized state.
    pub lhs: f64,
    /// Boundary multiplier paired with `eta`.
    pub rhs: f64,
    pub defect: f64,
}

/// Pair the linearized response to `eta` with the cost mismatches and
/// compare against the multiplier part of the gradient applied to `eta`.
pub fn adjoint_identity_test(
    pb: &Problem,
    h: &BoundaryControl,
    eta: &BoundaryControl,
) -> Result<DualityReport> {
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let base = forward(pb, &scheme, h)?;
    let lin = solve_linearized_with(&scheme, &base, eta)?;
    let adj = solve_adjoint_with(&scheme, &base, &pb.targets)?;
    let tg = &pb.targets;
    let mut lhs = 0.0;
    for (k, (s, l)) in base.states.iter().zip(&lin).enumerate() {
        let mut du = s.u.clone();
        du.axpy(-1.0, tg.u_q.at(k));
        let mut dp = s.phi.clone();
        dp.axpy(-1.0, tg.phi_q.at(k));
        lhs += h.time_weight(k) * (du.dot(&l.w) + dp.dot(&l.psi));
    }
    let (last, l) = (base.final_state(), lin.last().expect("at least one node"));
    let mut du = last.u.clone();
    du.axpy(-1.0, &tg.u_omega);
    let mut dp = last.phi.clone();
    dp.axpy(-1.0, &tg.phi_omega);
    lhs += du.dot(&l.w) + dp.dot(&l.psi);
    let mut g = reduced_gradient(h, &adj, &base, &scheme)?;
    g.axpy(-1.0, h);
    let rhs = g.inner(eta);
    let scale = lhs.abs().max(rhs.abs());
    let defect = if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    };
    Ok(DualityReport { lhs, rhs, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::Targets;
    use crate::presets;
    use crate::state::solve_forward;

    fn linear_problem(n: usize, dt: f64, steps: usize) -> Problem {
        let mut pb = presets::lid(n, dt, steps).unwrap();
        pb.cfg.convection = false;
        pb.pot.enabled = false;
        pb
    }

    fn direction(pb: &Problem, seed: u64) -> BoundaryControl {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        smooth_direction(pb.cfg.grid, pb.cfg.dt, pb.cfg.steps(), &mut rng)
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = DEFAULT_EPS.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = DEFAULT_EPS.iter().map(|e| (3.0 * e * e).ln()).collect();
        assert!((ls_slope(&xs, &ys) - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_direction_is_degenerate() {
        let pb = presets::lid(8, 0.01, 4).unwrap();
        let eta = BoundaryControl::zeros(pb.cfg.grid, 0.01, 4);
        let r = taylor_test(&pb, &pb.control, &eta, &DEFAULT_EPS).unwrap();
        assert!(r.degenerate);
        assert!(r.fitted_order.is_none());
        assert!(r.remainder_norms.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_problem_has_roundoff_remainder() {
        let pb = linear_problem(8, 0.01, 4);
        let r = taylor_test(&pb, &pb.control, &direction(&pb, 1), &DEFAULT_EPS).unwrap();
        assert!(r.degenerate, "{:?}", r.remainder_norms);
    }

    #[test]
    fn nonlinear_remainder_is_second_order() {
        let pb = presets::lid(16, 0.01, 8).unwrap();
        let r = taylor_test(&pb, &pb.control, &direction(&pb, 2), &DEFAULT_EPS).unwrap();
        let order = r.fitted_order.unwrap();
        assert!(
            (1.8..=2.2).contains(&order),
            "order {order}, {:?}",
            r.remainder_norms
        );
    }

    #[test]
    fn fd_of_quadratic_cost_is_exact() {
        let mut pb = linear_problem(8, 0.01, 4);
        let traj = solve_forward(&pb.u0, &pb.phi0, &pb.control, &pb.cfg, &pb.pot).unwrap();
        pb.targets = Targets::from_trajectory(&traj);
        let eta = direction(&pb, 3);
        for eps in [1e-1, 1e-3] {
            let fd = fd_gradient(&pb, &pb.control, &eta, eps).unwrap();
            let exact = pb.control.inner(&eta);
            assert!((fd - exact).abs() <= 1e-12 * exact.abs(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn fd_of_zero_instance_vanishes() {
        let pb = presets::rest(8, 0.01, 4).unwrap();
        let eta = direction(&pb, 4);
        // exact gradient is zero; the central difference leaves an O(eps^2)
        // residue from the cubic convection term
        let a = fd_gradient(&pb, &pb.control, &eta, 1e-3).unwrap();
        let b = fd_gradient(&pb, &pb.control, &eta, 1e-4).unwrap();
        assert!(a.abs() <= 1e-9, "{a}");
        assert!(b.abs() <= 0.02 * a.abs() + 1e-16, "{a} {b}");
    }

    #[test]
    fn duality_trivial_cases() {
        let mut pb = presets::lid(8, 0.01, 4).unwrap();
        let zero = BoundaryControl::zeros(pb.cfg.grid, 0.01, 4);
        let r = adjoint_identity_test(&pb, &pb.control, &zero).unwrap();
        assert_eq!((r.lhs, r.rhs, r.defect), (0.0, 0.0, 0.0));
        let traj = solve_forward(&pb.u0, &pb.phi0, &pb.control, &pb.cfg, &pb.pot).unwrap();
        pb.targets = Targets::from_trajectory(&traj);
        let r = adjoint_identity_test(&pb, &pb.control, &direction(&pb, 5)).unwrap();
        assert_eq!((r.lhs, r.rhs, r.defect), (0.0, 0.0, 0.0));
    }

    #[test]
    fn duality_defect_small_and_shrinking() {
        let mut defects = vec![];
        for (n, steps) in [(8, 4), (16, 8)] {
            let pb = presets::lid(n, 0.04 / steps as f64, steps).unwrap();
            let r = adjoint_identity_test(&pb, &pb.control, &direction(&pb, 6)).unwrap();
            defects.push(r.defect);
        }
        assert!(defects[1] <= 1e-2, "{defects:?}");
        assert!(defects[1] < defects[0], "{defects:?}");
    }

    #[test]
    fn gradcheck_agrees_on_lid() {
        let pb = presets::lid(16, 0.01, 8).unwrap();
        let r = gradcheck(&pb, &pb.control, 3, 1e-4, 7).unwrap();
        assert_eq!(r.directions.len(), 3);
        assert!(r.worst_error <= 5e-2, "{:?}", r.directions);
    }
}
