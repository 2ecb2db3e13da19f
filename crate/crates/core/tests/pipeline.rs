use chns::config::{config_from_str, RunConfig};
use chns::io;
use chns::objective::eval_cost;
use chns::run;
use chns::state::{diagnostics, solve_forward, Trajectory};
use std::path::Path;

const LID: &str = "seed = 5\n[grid]\nnx = 12\nny = 12\n[time]\nT = 0.03\ndt = 5e-3\n[control]\ninitial = \"lid\"\n[targets]\npreset = \"pattern\"\n";

fn cfg(text: &str, base: &Path) -> RunConfig {
    config_from_str(text, Path::new("t.toml"), base, None).unwrap()
}

fn forward(rc: &RunConfig) -> Trajectory {
    let pb = &rc.problem;
    solve_forward(&pb.u0, &pb.phi0, &pb.control, &pb.cfg, &pb.pot).unwrap()
}

#[test]
fn reloaded_snapshots_reproduce_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let rc = cfg(LID, dir.path());
    let out = dir.path().join("sim");
    run::simulate(&rc, &out).unwrap();
    let traj = forward(&rc);
    let last = traj.final_state();
    let (u, _) = io::read_velocity(&out.join("u_final.txt")).unwrap();
    let (phi, t) = io::read_scalar(&out.join("phi_final.txt")).unwrap();
    assert_eq!(t, last.t);
    assert_eq!(u, last.u);
    assert_eq!(phi, last.phi);
    let pot = &rc.problem.pot;
    let d = diagnostics(&traj, pot).pop().unwrap();
    assert_eq!(chns::state::kinetic_energy(&u), d.kinetic_energy);
    assert_eq!(chns::state::mixing_energy(&phi, pot), d.mixing_energy);
}

#[test]
fn snapshots_as_terminal_targets_zero_the_terminal_cost() {
    let dir = tempfile::tempdir().unwrap();
    let rc = cfg(LID, dir.path());
    run::simulate(&rc, &dir.path().join("sim")).unwrap();
    let text = format!("{LID}u_omega = \"sim/u_final.txt\"\nphi_omega = \"sim/phi_final.txt\"\n");
    let rc2 = cfg(&text, dir.path());
    let traj = forward(&rc2);
    let c = eval_cost(&traj, &rc2.problem.control, &rc2.problem.targets).unwrap();
    assert_eq!((c.final_u, c.final_phi), (0.0, 0.0));
    assert!(c.track_phi > 0.0);
    // the adjoint subcommand accepts the reloaded targets
    run::adjoint(&rc2, &dir.path().join("adj")).unwrap();
}

#[test]
fn control_file_reproduces_preset_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let rc = cfg(LID, dir.path());
    io::write_control(&dir.path().join("h.txt"), &rc.problem.control).unwrap();
    let rc2 = cfg(
        &LID.replace("initial = \"lid\"", "file = \"h.txt\""),
        dir.path(),
    );
    assert_eq!(rc2.problem.control, rc.problem.control);
    assert_eq!(forward(&rc2).states, forward(&rc).states);
}

#[test]
fn optimize_history_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let rc = cfg(&format!("{LID}[optimizer]\nmax_iters = 3\n"), dir.path());
    run::run_optimize(&rc, &dir.path().join("a")).unwrap();
    run::run_optimize(&rc, &dir.path().join("b")).unwrap();
    let a = std::fs::read(dir.path().join("a/history.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/history.csv")).unwrap();
    assert_eq!(a, b);
}
