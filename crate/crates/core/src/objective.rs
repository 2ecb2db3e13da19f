//! Cost functional and reduced boundary gradient.

use crate::adjoint::{boundary_multipliers, AdjointState, Targets};
use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::scheme::Scheme;
use crate::state::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub track_u: f64,
    pub track_phi: f64,
    pub final_u: f64,
    pub final_phi: f64,
    pub control: f64,
    pub total: f64,
}

/// Evaluate the five cost terms. Time integrals use the trapezoid rule
/// over the time nodes; velocity norms run over interior faces.
pub fn eval_cost(
    traj: &Trajectory,
    h: &BoundaryControl,
    targets: &Targets,
) -> Result<CostBreakdown> {
    let g = traj.grid();
    if h.grid != g {
        return Err(Error::ShapeMismatch(
            "control grid differs from trajectory grid".into(),
        ));
    }
    if traj.states.len() != h.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory has {} states, control has {} nodes",
            traj.states.len(),
            h.n_nodes()
        )));
    }
    targets.validate(&g, h.n_nodes())?;
    let (mut track_u, mut track_phi) = (0.0, 0.0);
    for (k, s) in traj.states.iter().enumerate() {
        let w = h.time_weight(k);
        let mut du = s.u.clone();
        du.axpy(-1.0, targets.u_q.at(k));
        let mut dp = s.phi.clone();
        dp.axpy(-1.0, targets.phi_q.at(k));
        track_u += 0.5 * w * du.dot(&du);
        track_phi += 0.5 * w * dp.dot(&dp);
    }
    let last = traj.final_state();
    let mut du = last.u.clone();
    du.axpy(-1.0, &targets.u_omega);
    let mut dp = last.phi.clone();
    dp.axpy(-1.0, &targets.phi_omega);
    let final_u = 0.5 * du.dot(&du);
    let final_phi = 0.5 * dp.dot(&dp);
    let control = 0.5 * h.inner(h);
    Ok(CostBreakdown {
        track_u,
        track_phi,
        final_u,
        final_phi,
        control,
        total: track_u + track_phi + final_u + final_phi + control,
    })
}

/// Reduced gradient `h - phat n - nu dp/dn`, stored like a control
/// (tangential and normal components per face and node).
pub type GradientField = BoundaryControl;

/// Assemble the gradient from the adjoint (backward order, as returned by
/// [`crate::adjoint::solve_adjoint`]).
///
/// The result represents the derivative in the trapezoid inner product of
/// [`BoundaryControl::inner`]: the multiplier of node `t_k` covers the
/// interval ending at `t_k`, so it is scaled by `dt / w_k` (2 at the final
/// node). The `t = 0` slice keeps only `h`.
pub fn reduced_gradient(
    h: &BoundaryControl,
    adj: &[AdjointState],
    base: &Trajectory,
    scheme: &Scheme,
) -> Result<GradientField> {
    h.same_nodes(&base.control)?;
    if adj.len() != h.n_nodes() {
        return Err(Error::TimeNodeMismatch(format!(
            "{} adjoint states for {} control nodes",
            adj.len(),
            h.n_nodes()
        )));
    }
    let mult = boundary_multipliers(adj, base, scheme)?;
    let m = h.steps();
    let dt = h.dt();
    let mut g = h.clone();
    for (r, mu) in mult.iter().enumerate().take(m) {
        let k = m - r;
        if (mu.t - h.time_nodes[k]).abs() > 1e-12 * (1.0 + mu.t.abs()) {
            return Err(Error::TimeNodeMismatch(format!(
                "adjoint time {} vs control time {}",
                mu.t, h.time_nodes[k]
            )));
        }
        let c = dt / h.time_weight(k);
        let (n, t) = mu.normal_tangential();
        for (a, b) in g.tangential[k].values.iter_mut().zip(&t.values) {
            *a += c * b;
        }
        for (a, b) in g.normal[k].values.iter_mut().zip(&n.values) {
            *a += c * b;
        }
    }
    Ok(g)
}
