//! Linearized system around a stored forward trajectory: the directional
//! derivative of the control-to-state map.

use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::grid::{ScalarField, VelocityField};
use crate::potential::Potential;
use crate::scheme::Scheme;
use crate::state::{SimConfig, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedState {
    pub t: f64,
    pub w: VelocityField,
    pub psi: ScalarField,
    pub mu_psi: ScalarField,
}

/// Solve the linearized system with boundary perturbation `eta` and zero
/// initial data. Each step is the exact derivative of the forward step.
pub fn solve_linearized(
    base: &Trajectory,
    eta: &BoundaryControl,
    cfg: &SimConfig,
    pot: &Potential,
) -> Result<Vec<LinearizedState>> {
    let scheme = Scheme::new(cfg, *pot);
    solve_linearized_with(&scheme, base, eta)
}

pub fn solve_linearized_with(
    scheme: &Scheme,
    base: &Trajectory,
    eta: &BoundaryControl,
) -> Result<Vec<LinearizedState>> {
    base.check_complete()?;
    eta.same_nodes(&base.control)?;
    eta.validate()?;
    let g = scheme.grid;
    if eta.tangential[0]
        .values
        .iter()
        .chain(&eta.normal[0].values)
        .any(|v| *v != 0.0)
    {
        return Err(Error::CompatibilityViolation(
            "perturbation must vanish at t = 0 (zero initial data)".into(),
        ));
    }
    let mut out = Vec::with_capacity(base.states.len());
    out.push(LinearizedState {
        t: base.states[0].t,
        w: VelocityField::zeros(g),
        psi: ScalarField::zeros(g),
        mu_psi: ScalarField::zeros(g),
    });
    let mut dwall = eta.wall(0);
    for k in 0..base.steps() {
        let dnext = eta.wall(k + 1);
        let prev = &out[k];
        let (w, psi, mu_psi) = scheme.tangent_step(
            &base.states[k],
            &base.states[k + 1],
            &base.control.wall(k),
            &prev.w,
            &prev.psi,
            &dwall,
            &dnext,
        )?;
        out.push(LinearizedState {
            t: base.states[k + 1].t,
            w,
            psi,
            mu_psi,
        });
        dwall = dnext;
    }
    Ok(out)
}
