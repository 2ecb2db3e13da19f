//! Subcommand drivers shared by the binary and the integration tests. Each
//! writes its tables and snapshots into an output directory and finishes
//! with `manifest.toml`.

use crate::adjoint::{boundary_multipliers, solve_adjoint_with};
use crate::config::RunConfig;
use crate::error::Result;
use crate::exec;
use crate::io::{self, RunManifest, Table};
use crate::linearized::solve_linearized_with;
use crate::objective::{eval_cost, reduced_gradient};
use crate::optimizer::optimize;
use crate::scheme::Scheme;
use crate::state::{diagnostics, solve_forward_with};
use crate::verify::{self, smooth_direction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Which check `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    Taylor,
    Gradcheck,
    Duality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    /// False when a `verify` threshold is missed.
    pub passed: bool,
}

impl Outcome {
    fn new() -> Self {
        Self {
            metrics: BTreeMap::new(),
            passed: true,
        }
    }

    fn set(&mut self, k: &str, v: f64) {
        self.metrics.insert(k.to_string(), v);
    }
}

fn finish(rc: &RunConfig, out: &Path, name: &str, start: Instant, o: Outcome) -> Result<Outcome> {
    let cfg = &rc.problem.cfg;
    RunManifest {
        subcommand: name.to_string(),
        config_digest: rc.digest.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        nx: cfg.grid.nx,
        ny: cfg.grid.ny,
        dt: cfg.dt,
        steps: cfg.steps(),
        seed: rc.seed,
        parallel: exec::is_parallel(),
        wall_time_s: start.elapsed().as_secs_f64(),
        metrics: o.metrics.clone(),
        outcome: if o.passed {
            "pass".into()
        } else {
            "fail".into()
        },
    }
    .write(&out.join("manifest.toml"))?;
    Ok(o)
}

/// Number of phase snapshots kept from a forward run.
const FRAMES: usize = 10;

pub fn simulate(rc: &RunConfig, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let pb = &rc.problem;
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let traj = solve_forward_with(&scheme, &pb.u0, &pb.phi0, &pb.control)?;
    let mut t = Table::new(&[
        "t",
        "mass",
        "kinetic_energy",
        "mixing_energy",
        "total_energy",
        "divergence_residual",
    ]);
    let diags = diagnostics(&traj, &pb.pot);
    for d in &diags {
        t.push(vec![
            d.t,
            d.mass,
            d.kinetic_energy,
            d.mixing_energy,
            d.kinetic_energy + d.mixing_energy,
            d.divergence_residual,
        ]);
    }
    t.write(&out.join("diagnostics.csv"))?;
    let m = traj.steps();
    let stride = m.div_ceil(FRAMES).max(1);
    for (k, s) in traj.states.iter().enumerate() {
        if k % stride == 0 || k == m {
            io::write_scalar(
                &out.join("snapshots").join(format!("phi_{k:05}.txt")),
                &s.phi,
                s.t,
            )?;
        }
    }
    let last = traj.final_state();
    io::write_velocity(&out.join("u_final.txt"), &last.u, last.t)?;
    io::write_scalar(&out.join("phi_final.txt"), &last.phi, last.t)?;
    io::write_control(&out.join("control.txt"), &pb.control)?;
    let cost = eval_cost(&traj, &pb.control, &pb.targets)?;
    let mut o = Outcome::new();
    let (d0, dm) = (&diags[0], &diags[m]);
    o.set("mass_drift", (dm.mass - d0.mass).abs());
    o.set("energy_initial", d0.kinetic_energy + d0.mixing_energy);
    o.set("energy_final", dm.kinetic_energy + dm.mixing_energy);
    o.set(
        "max_divergence",
        diags
            .iter()
            .map(|d| d.divergence_residual)
            .fold(0.0, f64::max),
    );
    o.set("cost", cost.total);
    finish(rc, out, "simulate", start, o)
}

fn direction(rc: &RunConfig) -> crate::control::BoundaryControl {
    let cfg = &rc.problem.cfg;
    let mut rng = ChaCha8Rng::seed_from_u64(rc.seed);
    smooth_direction(cfg.grid, cfg.dt, cfg.steps(), &mut rng)
}

/// Linearized response to a seeded smooth direction.
pub fn linearize(rc: &RunConfig, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let pb = &rc.problem;
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let base = solve_forward_with(&scheme, &pb.u0, &pb.phi0, &pb.control)?;
    let eta = direction(rc);
    let lin = solve_linearized_with(&scheme, &base, &eta)?;
    let mut t = Table::new(&["t", "w_l2", "psi_l2"]);
    for l in &lin {
        t.push(vec![l.t, l.w.norm_l2(), l.psi.norm_l2()]);
    }
    t.write(&out.join("linearized.csv"))?;
    io::write_control(&out.join("direction.txt"), &eta)?;
    let last = lin.last().expect("nodes");
    io::write_velocity(&out.join("w_final.txt"), &last.w, last.t)?;
    io::write_scalar(&out.join("psi_final.txt"), &last.psi, last.t)?;
    let mut o = Outcome::new();
    o.set("w_final_l2", last.w.norm_l2());
    o.set("psi_final_l2", last.psi.norm_l2());
    o.set("psi_mass_final", last.psi.sum() * pb.cfg.grid.cell_area());
    finish(rc, out, "linearize", start, o)
}

/// Backward adjoint sweep, boundary multipliers and the reduced gradient.
pub fn adjoint(rc: &RunConfig, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let pb = &rc.problem;
    let scheme = Scheme::new(&pb.cfg, pb.pot);
    let base = solve_forward_with(&scheme, &pb.u0, &pb.phi0, &pb.control)?;
    let adj = solve_adjoint_with(&scheme, &base, &pb.targets)?;
    let mut t = Table::new(&["t", "p_l2", "zeta_l2", "phat_l2"]);
    for a in adj.iter().rev() {
        t.push(vec![a.t, a.p.norm_l2(), a.zeta.norm_l2(), a.phat.norm_l2()]);
    }
    t.write(&out.join("adjoint.csv"))?;
    let mult = boundary_multipliers(&adj, &base, &scheme)?;
    let mut mt = Table::new(&["t", "face", "p1_n", "p1_t", "zeta1_flux"]);
    for m in mult.iter().rev() {
        let (n, tg) = m.normal_tangential();
        for f in 0..n.values.len() {
            mt.push(vec![
                m.t,
                f as f64,
                n.values[f],
                tg.values[f],
                m.zeta1_flux.values[f],
            ]);
        }
    }
    mt.write(&out.join("multipliers.csv"))?;
    let g = reduced_gradient(&pb.control, &adj, &base, &scheme)?;
    io::write_control(&out.join("gradient.txt"), &g)?;
    let a0 = adj.last().expect("nodes");
    io::write_velocity(&out.join("p_initial.txt"), &a0.p, a0.t)?;
    io::write_scalar(&out.join("zeta_initial.txt"), &a0.zeta, a0.t)?;
    let mut o = Outcome::new();
    o.set("gradient_norm", g.norm());
    o.set("cost", eval_cost(&base, &pb.control, &pb.targets)?.total);
    finish(rc, out, "adjoint", start, o)
}

pub fn run_optimize(rc: &RunConfig, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let r = optimize(&rc.problem, &rc.set, &rc.optimizer)?;
    let mut t = Table::new(&[
        "iter",
        "J",
        "track_u",
        "track_phi",
        "final_u",
        "final_phi",
        "control",
        "grad_residual",
        "step",
    ]);
    for (k, c) in r.cost_history.iter().enumerate() {
        t.push(vec![
            k as f64,
            c.total,
            c.track_u,
            c.track_phi,
            c.final_u,
            c.final_phi,
            c.control,
            r.grad_norm_history[k],
            r.step_history[k],
        ]);
    }
    t.write(&out.join("history.csv"))?;
    io::write_control(&out.join("h_final.txt"), &r.h_final)?;
    let mut o = Outcome::new();
    let (j0, j1) = (
        r.cost_history[0].total,
        r.cost_history.last().expect("history").total,
    );
    o.set("iterations", r.iterations as f64);
    o.set("cost_initial", j0);
    o.set("cost_final", j1);
    o.set("cost_reduction", if j0 > 0.0 { 1.0 - j1 / j0 } else { 0.0 });
    o.set("residual_initial", r.grad_norm_history[0]);
    o.set(
        "residual_final",
        *r.grad_norm_history.last().expect("history"),
    );
    o.set("h_norm", r.h_final.norm());
    log::info!("optimize stopped: {}", r.termination.as_str());
    finish(
        rc,
        out,
        &format!("optimize ({})", r.termination.as_str()),
        start,
        o,
    )
}

pub fn run_verify(rc: &RunConfig, check: Check, out: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let pb = &rc.problem;
    let v = &rc.verify;
    let mut o = Outcome::new();
    let name = match check {
        Check::Taylor => {
            let r = verify::taylor_test(pb, &pb.control, &direction(rc), &v.eps)?;
            let mut t = Table::new(&["eps", "remainder"]);
            for (e, rem) in r.eps_list.iter().zip(&r.remainder_norms) {
                t.push(vec![*e, *rem]);
            }
            t.write(&out.join("taylor.csv"))?;
            let order = r.fitted_order.unwrap_or(f64::NAN);
            o.set("fitted_order", order);
            o.passed = (v.order_min..=v.order_max).contains(&order);
            "verify taylor"
        }
        Check::Gradcheck => {
            let r = verify::gradcheck(pb, &pb.control, v.directions, v.fd_eps, rc.seed)?;
            let mut t = Table::new(&["direction", "fd", "adjoint", "rel_error"]);
            for (i, d) in r.directions.iter().enumerate() {
                t.push(vec![i as f64, d.fd, d.adjoint, d.rel_error]);
            }
            t.write(&out.join("gradcheck.csv"))?;
            o.set("worst_error", r.worst_error);
            o.passed = r.worst_error <= v.gradcheck_tol;
            "verify gradcheck"
        }
        Check::Duality => {
            let r = verify::adjoint_identity_test(pb, &pb.control, &direction(rc))?;
            let mut t = Table::new(&["lhs", "rhs", "defect"]);
            t.push(vec![r.lhs, r.rhs, r.defect]);
            t.write(&out.join("duality.csv"))?;
            o.set("defect", r.defect);
            o.passed = r.defect <= v.duality_tol;
            "verify duality"
        }
    };
    finish(rc, out, name, start, o)
}
