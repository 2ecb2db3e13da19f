//! Named problem instances.

use crate::adjoint::{Series, Targets};
use crate::control::BoundaryControl;
use crate::error::Result;
use crate::grid::{Grid, ScalarField, VelocityField};
use crate::potential::Potential;
use crate::state::{solve_forward, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Everything needed for a forward run and a cost evaluation.
#[derive(Debug, Clone)]
pub struct Problem {
    pub cfg: SimConfig,
    pub pot: Potential,
    pub u0: VelocityField,
    pub phi0: ScalarField,
    pub control: BoundaryControl,
    pub targets: Targets,
}

impl Problem {
    /// Uncontrolled problem at rest with zero targets.
    pub fn at_rest(cfg: SimConfig, phi0: ScalarField) -> Self {
        let g = cfg.grid;
        Self {
            control: cfg.zero_control(),
            targets: Targets::zeros(g),
            pot: Potential::default(),
            u0: VelocityField::zeros(g),
            phi0,
            cfg,
        }
    }
}

/// All-zero state and control.
pub fn rest(n: usize, dt: f64, steps: usize) -> Result<Problem> {
    let g = Grid::unit_square(n)?;
    Ok(Problem::at_rest(
        SimConfig::new(g, 1.0, dt * steps as f64, dt),
        ScalarField::zeros(g),
    ))
}

/// Pure phase `phi = 1` at rest.
pub fn pure_phase(n: usize, dt: f64, steps: usize) -> Result<Problem> {
    let g = Grid::unit_square(n)?;
    Ok(Problem::at_rest(
        SimConfig::new(g, 1.0, dt * steps as f64, dt),
        ScalarField::constant(g, 1.0),
    ))
}

/// Uniform noise in `[-amp, amp]` from a seeded generator.
pub fn noise(g: Grid, amp: f64, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField {
        grid: g,
        values: (0..g.n_cells())
            .map(|_| rng.gen_range(-amp..=amp))
            .collect(),
    }
}

/// Uncontrolled spinodal decomposition on an `l x l` square from seeded
/// noise in `[-0.05, 0.05]`.
pub fn spinodal(n: usize, l: f64, dt: f64, steps: usize, seed: u64) -> Result<Problem> {
    let g = Grid::new(n, n, l, l)?;
    Ok(Problem::at_rest(
        SimConfig::new(g, 1.0, dt * steps as f64, dt),
        noise(g, 0.05, seed),
    ))
}

/// Smooth phase pattern used by the controlled presets.
pub fn smooth_phase(g: Grid) -> ScalarField {
    let (lx, ly) = (g.lx, g.ly);
    ScalarField::from_fn(g, |x, y| 0.6 * (PI * x / lx).cos() * (PI * y / ly).cos())
}

/// Lid profile: top-edge velocity `amp sin^2(pi x / lx)` in `+x`, ramped
/// linearly in time from zero.
pub fn lid_control(g: Grid, dt: f64, steps: usize, amp: f64) -> BoundaryControl {
    let t_final = dt * steps as f64;
    BoundaryControl::tangential_from_fn(g, dt, steps, |f, t| {
        if f.normal.1 > 0.5 {
            // top tangent points in -x
            -amp * (PI * f.center.0 / g.lx).sin().powi(2) * (t / t_final)
        } else {
            0.0
        }
    })
}

/// Targets that pull the phase towards a one-dimensional profile and the
/// final velocity towards a single vortex.
pub fn pattern_targets(g: Grid) -> Targets {
    let (lx, ly) = (g.lx, g.ly);
    let phi_t = ScalarField::from_fn(g, |x, _| 0.5 * (PI * x / lx).cos());
    Targets {
        u_q: Series::Constant(VelocityField::zeros(g)),
        phi_q: Series::Constant(phi_t.clone()),
        u_omega: VelocityField::from_stream(g, |x, y| {
            0.1 * (PI * x / lx).sin().powi(2) * (PI * y / ly).sin().powi(2)
        }),
        phi_omega: phi_t,
    }
}

/// Lid-driven cavity on the unit square with a smooth phase pattern.
pub fn lid(n: usize, dt: f64, steps: usize) -> Result<Problem> {
    let g = Grid::unit_square(n)?;
    let cfg = SimConfig::new(g, 1.0, dt * steps as f64, dt);
    Ok(Problem {
        control: lid_control(g, dt, steps, 2.0),
        targets: pattern_targets(g),
        pot: Potential::default(),
        u0: VelocityField::zeros(g),
        phi0: smooth_phase(g),
        cfg,
    })
}

/// Known in/outflow control: flow enters through the left edge and leaves
/// through the right edge with a parabolic profile, plus a tangential
/// shear on the bottom edge; zero at `t = 0`.
pub fn reference_control(g: Grid, dt: f64, steps: usize, amp: f64) -> BoundaryControl {
    let t_final = dt * steps as f64;
    let mut h = BoundaryControl::zeros(g, dt, steps);
    for k in 0..=steps {
        let s = (PI * k as f64 * dt / t_final * 0.5).sin();
        for f in g.boundary_faces() {
            let i = g.boundary_index(f.edge, f.index);
            let (x, y) = (f.center.0 / g.lx, f.center.1 / g.ly);
            let bump = |z: f64| 6.0 * z * (1.0 - z);
            if f.normal.0.abs() > 0.5 {
                // inflow on the left, outflow on the right
                h.normal[k].values[i] = f.normal.0 * amp * s * bump(y);
            }
            if f.normal.1 < -0.5 {
                h.tangential[k].values[i] = 0.5 * amp * s * (PI * x).sin().powi(2);
            }
        }
    }
    h
}

/// Targets produced by [`reference_control`] (deliberate inverse crime);
/// the problem's own control starts at zero.
pub fn inverse_crime(n: usize, dt: f64, steps: usize, amp: f64) -> Result<Problem> {
    let g = Grid::unit_square(n)?;
    let cfg = SimConfig::new(g, 1.0, dt * steps as f64, dt);
    let pot = Potential::default();
    let u0 = VelocityField::zeros(g);
    let phi0 = smooth_phase(g);
    let h_ref = reference_control(g, dt, steps, amp);
    let traj = solve_forward(&u0, &phi0, &h_ref, &cfg, &pot)?;
    Ok(Problem {
        control: cfg.zero_control(),
        targets: Targets::from_trajectory(&traj),
        pot,
        u0,
        phi0,
        cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_seeded_and_bounded() {
        let g = Grid::unit_square(8).unwrap();
        let a = noise(g, 0.05, 7);
        assert_eq!(a, noise(g, 0.05, 7));
        assert_ne!(a, noise(g, 0.05, 8));
        assert!(a.max_abs() <= 0.05);
    }

    #[test]
    fn controls_are_compatible_and_flux_free() {
        let g = Grid::unit_square(16).unwrap();
        for h in [
            lid_control(g, 0.01, 5, 2.0),
            reference_control(g, 0.01, 5, 1.0),
        ] {
            h.validate().unwrap();
            h.check_initial(&VelocityField::zeros(g), 0.0).unwrap();
        }
    }
}
