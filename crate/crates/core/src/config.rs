//! Run configuration: TOML sections `grid`, `physics`, `time`, `initial`,
//! `control`, `targets`, `solver`, `optimizer`, `verify`, plus a top-level
//! `seed`. Every key has a default, so an empty file is a valid config.

use crate::adjoint::{Series, Targets};
use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VelocityField};
use crate::io;
use crate::optimizer::{AdmissibleSet, ControlMode, OptimizerConfig};
use crate::potential::Potential;
use crate::presets::{self, Problem};
use crate::state::{solve_forward, SimConfig};
use crate::verify::DEFAULT_EPS;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl Default for RawGrid {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPhysics {
    nu: f64,
    stabilization: f64,
    /// Test-only: false disables the double-well potential.
    potential: bool,
    /// Test-only: false disables convection and phase transport.
    convection: bool,
}

impl Default for RawPhysics {
    fn default() -> Self {
        Self {
            nu: 1.0,
            stabilization: 2.0,
            potential: true,
            convection: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTime {
    #[serde(rename = "T")]
    t_final: f64,
    dt: f64,
}

impl Default for RawTime {
    fn default() -> Self {
        Self {
            t_final: 0.1,
            dt: 2.5e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawInitial {
    /// `smooth`, `spinodal`, `pure` or `zero`.
    phi: String,
    noise_amplitude: f64,
    phi_file: Option<PathBuf>,
    u_file: Option<PathBuf>,
}

impl Default for RawInitial {
    fn default() -> Self {
        Self {
            phi: "smooth".into(),
            noise_amplitude: 0.05,
            phi_file: None,
            u_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawControl {
    /// `tangential` or `free`.
    mode: String,
    #[serde(rename = "L")]
    radius: f64,
    hmax: Option<f64>,
    /// Only `nodal` (piecewise linear in time, per boundary face) exists.
    parameterization: String,
    /// `zero`, `lid` or `reference`.
    initial: String,
    amplitude: f64,
    file: Option<PathBuf>,
}

impl Default for RawControl {
    fn default() -> Self {
        Self {
            mode: "tangential".into(),
            radius: 10.0,
            hmax: None,
            parameterization: "nodal".into(),
            initial: "zero".into(),
            amplitude: 2.0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTargets {
    /// `zero`, `pattern` or `reference`.
    preset: String,
    reference_amplitude: f64,
    u_q: Option<PathBuf>,
    phi_q: Option<PathBuf>,
    u_omega: Option<PathBuf>,
    phi_omega: Option<PathBuf>,
}

impl Default for RawTargets {
    fn default() -> Self {
        Self {
            preset: "zero".into(),
            reference_amplitude: 1.0,
            u_q: None,
            phi_q: None,
            u_omega: None,
            phi_omega: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSolver {
    div_tol: f64,
    lin_tol: f64,
}

impl Default for RawSolver {
    fn default() -> Self {
        Self {
            div_tol: 1e-10,
            lin_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOptimizer {
    max_iters: usize,
    armijo_c1: f64,
    backtrack: f64,
    step0: f64,
    grad_tol: f64,
    cost_tol: f64,
    max_backtracks: usize,
}

impl Default for RawOptimizer {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        Self {
            max_iters: d.max_iters,
            armijo_c1: d.armijo_c1,
            backtrack: d.backtrack,
            step0: d.step0,
            grad_tol: d.grad_tol,
            cost_tol: d.cost_tol,
            max_backtracks: d.max_backtracks,
        }
    }
}

/// Thresholds for the `verify` subcommands.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub eps: Vec<f64>,
    pub order_min: f64,
    pub order_max: f64,
    pub directions: usize,
    pub fd_eps: f64,
    pub gradcheck_tol: f64,
    pub duality_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS.to_vec(),
            order_min: 1.8,
            order_max: 2.2,
            directions: 5,
            fd_eps: 1e-4,
            gradcheck_tol: 5e-2,
            duality_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    seed: u64,
    grid: RawGrid,
    physics: RawPhysics,
    time: RawTime,
    initial: RawInitial,
    control: RawControl,
    targets: RawTargets,
    solver: RawSolver,
    optimizer: RawOptimizer,
    verify: VerifyConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse(text: &str, path: &Path) -> Result<RawConfig> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        msg: e.message().to_string(),
    })
}

/// Validated configuration with the assembled problem instance.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: Problem,
    pub set: AdmissibleSet,
    pub optimizer: OptimizerConfig,
    pub verify: VerifyConfig,
    pub seed: u64,
    /// SHA-256 of the config bytes (and the seed override, if any).
    pub digest: String,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    load_config_with(path, None)
}

/// Load with an optional seed override (the `--seed` flag).
pub fn load_config_with(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    if !path.exists() {
        return Err(Error::MissingInput(path.display().to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config_from_str(&text, path, base, seed)
}

/// Parse and validate `text`; relative file paths resolve against `base`.
pub fn config_from_str(
    text: &str,
    path: &Path,
    base: &Path,
    seed: Option<u64>,
) -> Result<RunConfig> {
    let raw = parse(text, path)?;
    let mut hashed = text.as_bytes().to_vec();
    if let Some(s) = seed {
        hashed.extend_from_slice(format!("\nseed override {s}").as_bytes());
    }
    let digest = io::sha256_hex(&hashed);
    build(raw, base, seed, digest)
}

fn one_of(errs: &mut Vec<String>, field: &str, value: &str, allowed: &[&str]) {
    if !allowed.contains(&value) {
        errs.push(format!("{field} must be one of {allowed:?}, got {value:?}"));
    }
}

fn resolve(
    base: &Path,
    p: &Option<PathBuf>,
    field: &str,
    errs: &mut Vec<String>,
) -> Option<PathBuf> {
    let p = p.as_ref()?;
    let full = if p.is_absolute() {
        p.clone()
    } else {
        base.join(p)
    };
    if !full.exists() {
        errs.push(format!("{field}: file {} does not exist", full.display()));
    }
    Some(full)
}

fn collect(errs: &mut Vec<String>, r: Result<()>) {
    match r {
        Ok(()) => {}
        Err(Error::Validation(v)) => errs.extend(v),
        Err(e) => errs.push(e.to_string()),
    }
}

fn same_grid(what: &str, a: Grid, b: Grid) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what} grid {}x{} differs from the configured {}x{}",
            a.nx, a.ny, b.nx, b.ny
        )));
    }
    Ok(())
}

fn build(raw: RawConfig, base: &Path, seed: Option<u64>, digest: String) -> Result<RunConfig> {
    let mut errs = vec![];
    let seed = seed.unwrap_or(raw.seed);
    let grid = Grid::new(raw.grid.nx, raw.grid.ny, raw.grid.lx, raw.grid.ly);
    if let Err(e) = &grid {
        errs.push(format!("grid: {e}"));
    }
    let ph = &raw.physics;
    if !(ph.stabilization >= 0.0) {
        errs.push(format!(
            "physics.stabilization must be non-negative, got {}",
            ph.stabilization
        ));
    }
    let sim = grid.as_ref().ok().map(|g| SimConfig {
        div_tol: raw.solver.div_tol,
        lin_tol: raw.solver.lin_tol,
        convection: ph.convection,
        ..SimConfig::new(*g, ph.nu, raw.time.t_final, raw.time.dt)
    });
    match &sim {
        Some(s) => collect(&mut errs, s.validate()),
        None => collect(
            &mut errs,
            SimConfig::new(Grid::unit_square(2)?, ph.nu, raw.time.t_final, raw.time.dt).validate(),
        ),
    }

    let ini = &raw.initial;
    one_of(
        &mut errs,
        "initial.phi",
        &ini.phi,
        &["smooth", "spinodal", "pure", "zero"],
    );
    if !(ini.noise_amplitude >= 0.0) {
        errs.push(format!(
            "initial.noise_amplitude must be non-negative, got {}",
            ini.noise_amplitude
        ));
    }
    let phi_file = resolve(base, &ini.phi_file, "initial.phi_file", &mut errs);
    let u_file = resolve(base, &ini.u_file, "initial.u_file", &mut errs);

    let c = &raw.control;
    one_of(&mut errs, "control.mode", &c.mode, &["tangential", "free"]);
    one_of(
        &mut errs,
        "control.parameterization",
        &c.parameterization,
        &["nodal"],
    );
    one_of(
        &mut errs,
        "control.initial",
        &c.initial,
        &["zero", "lid", "reference"],
    );
    let mode = if c.mode == "free" {
        ControlMode::FreeWithZeroFlux
    } else {
        ControlMode::TangentialOnly
    };
    let set = AdmissibleSet {
        radius: c.radius,
        mode,
        hmax: c.hmax,
    };
    collect(&mut errs, set.validate());
    let control_file = resolve(base, &c.file, "control.file", &mut errs);

    let t = &raw.targets;
    one_of(
        &mut errs,
        "targets.preset",
        &t.preset,
        &["zero", "pattern", "reference"],
    );
    let target_files = [
        resolve(base, &t.u_q, "targets.u_q", &mut errs),
        resolve(base, &t.phi_q, "targets.phi_q", &mut errs),
        resolve(base, &t.u_omega, "targets.u_omega", &mut errs),
        resolve(base, &t.phi_omega, "targets.phi_omega", &mut errs),
    ];

    let o = &raw.optimizer;
    let optimizer = OptimizerConfig {
        max_iters: o.max_iters,
        armijo_c1: o.armijo_c1,
        backtrack: o.backtrack,
        step0: o.step0,
        grad_tol: o.grad_tol,
        cost_tol: o.cost_tol,
        max_backtracks: o.max_backtracks,
    };
    collect(&mut errs, optimizer.validate());

    let v = &raw.verify;
    if v.eps.len() < 2
        || v.eps.iter().any(|e| !(*e > 0.0))
        || v.eps.windows(2).any(|w| w[1] >= w[0])
    {
        errs.push("verify.eps must hold at least two positive, strictly decreasing values".into());
    }
    if !(v.order_min < v.order_max) {
        errs.push("verify.order_min must be below verify.order_max".into());
    }
    if v.directions == 0 {
        errs.push("verify.directions must be at least 1".into());
    }
    if !(v.fd_eps > 0.0 && v.gradcheck_tol > 0.0 && v.duality_tol > 0.0) {
        errs.push(
            "verify.fd_eps, verify.gradcheck_tol and verify.duality_tol must be positive".into(),
        );
    }
    if !errs.is_empty() {
        return Err(Error::Validation(errs));
    }

    let cfg = sim.expect("validated");
    let g = cfg.grid;
    let (dt, steps) = (cfg.dt, cfg.steps());
    let pot = Potential {
        enabled: ph.potential,
        ..Potential::quartic(ph.stabilization)
    };

    let phi0 = match phi_file {
        Some(p) => {
            let f = io::read_scalar(&p)?.0;
            same_grid("initial.phi_file", f.grid, g)?;
            f
        }
        None => match ini.phi.as_str() {
            "smooth" => presets::smooth_phase(g),
            "spinodal" => presets::noise(g, ini.noise_amplitude, seed),
            "pure" => ScalarField::constant(g, 1.0),
            _ => ScalarField::zeros(g),
        },
    };
    let u0 = match u_file {
        Some(p) => {
            let u = io::read_velocity(&p)?.0;
            same_grid("initial.u_file", u.grid, g)?;
            u
        }
        None => VelocityField::zeros(g),
    };

    let control = match control_file {
        Some(p) => {
            let h = io::read_control(&p)?;
            same_grid("control.file", h.grid, g)?;
            h.same_nodes(&cfg.zero_control())?;
            if mode == ControlMode::TangentialOnly
                && h.normal.iter().any(|n| n.values.iter().any(|v| *v != 0.0))
            {
                return Err(Error::Validation(vec![
                    "control.file has a nonzero normal component in tangential mode".into(),
                ]));
            }
            h
        }
        None => match c.initial.as_str() {
            "lid" => presets::lid_control(g, dt, steps, c.amplitude),
            "reference" => presets::reference_control(g, dt, steps, c.amplitude),
            _ => BoundaryControl::zeros(g, dt, steps),
        },
    };
    control.check_initial(&u0, 1e-10)?;

    let mut targets = match t.preset.as_str() {
        "pattern" => presets::pattern_targets(g),
        "reference" => {
            let h_ref = presets::reference_control(g, dt, steps, t.reference_amplitude);
            Targets::from_trajectory(&solve_forward(&u0, &phi0, &h_ref, &cfg, &pot)?)
        }
        _ => Targets::zeros(g),
    };
    let [u_q, phi_q, u_omega, phi_omega] = target_files;
    if let Some(p) = u_q {
        let u = io::read_velocity(&p)?.0;
        same_grid("targets.u_q", u.grid, g)?;
        targets.u_q = Series::Constant(u);
    }
    if let Some(p) = phi_q {
        let f = io::read_scalar(&p)?.0;
        same_grid("targets.phi_q", f.grid, g)?;
        targets.phi_q = Series::Constant(f);
    }
    if let Some(p) = u_omega {
        let u = io::read_velocity(&p)?.0;
        same_grid("targets.u_omega", u.grid, g)?;
        targets.u_omega = u;
    }
    if let Some(p) = phi_omega {
        let f = io::read_scalar(&p)?.0;
        same_grid("targets.phi_omega", f.grid, g)?;
        targets.phi_omega = f;
    }

    Ok(RunConfig {
        problem: Problem {
            cfg,
            pot,
            u0,
            phi0,
            control,
            targets,
        },
        set,
        optimizer,
        verify: raw.verify,
        seed,
        digest,
    })
}
