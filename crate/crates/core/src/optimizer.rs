//! Projected-gradient descent with Armijo backtracking over the admissible
//! control set.

use crate::adjoint::solve_adjoint_with;
use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::objective::{eval_cost, reduced_gradient, CostBreakdown, GradientField};
use crate::presets::Problem;
use crate::scheme::Scheme;
use crate::state::solve_forward_with;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// Normal component fixed at zero.
    TangentialOnly,
    /// Normal component free up to zero net flux at every node.
    FreeWithZeroFlux,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    /// Radius of the `L2(Sigma)` ball.
    pub radius: f64,
    pub mode: ControlMode,
    /// Optional pointwise cap on both components.
    pub hmax: Option<f64>,
}

impl AdmissibleSet {
    pub fn new(radius: f64, mode: ControlMode) -> Self {
        Self {
            radius,
            mode,
            hmax: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = vec![];
        if !(self.radius > 0.0) {
            errs.push(format!("control.L must be positive, got {}", self.radius));
        }
        if let Some(m) = self.hmax {
            if !(m > 0.0) {
                errs.push(format!("control.hmax must be positive, got {m}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Whether `h` satisfies every constraint up to `tol` (relative).
    pub fn contains(&self, h: &BoundaryControl, tol: f64) -> bool {
        let norm_ok = h.norm() <= self.radius * (1.0 + tol);
        let mode_ok = match self.mode {
            ControlMode::TangentialOnly => {
                h.normal.iter().all(|n| n.values.iter().all(|v| *v == 0.0))
            }
            ControlMode::FreeWithZeroFlux => {
                (0..h.n_nodes()).all(|k| h.net_flux(k).abs() <= tol * (1.0 + h.max_abs()))
            }
        };
        let cap_ok = self.hmax.is_none_or(|m| h.max_abs() <= m * (1.0 + tol));
        norm_ok && mode_ok && cap_ok
    }
}

fn remove_flux(h: &mut BoundaryControl) {
    let g = h.grid;
    let perimeter: f64 = g.boundary_faces().map(|f| f.length).sum();
    for k in 0..h.n_nodes() {
        let c = h.net_flux(k) / perimeter;
        h.normal[k].values.iter_mut().for_each(|v| *v -= c);
    }
}

/// Shift `c` with `sum len_i clamp(v_i - c, -m, m) = 0`, by bisection.
fn clamped_shift(values: &mut [f64], lens: &[f64], m: f64) {
    let flux = |c: f64| {
        values
            .iter()
            .zip(lens)
            .map(|(v, l)| l * (v - c).clamp(-m, m))
            .sum::<f64>()
    };
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    lo -= m;
    hi += m;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if flux(mid) > 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let c = 0.5 * (lo + hi);
    values.iter_mut().for_each(|v| *v = (*v - c).clamp(-m, m));
}

/// Projection onto the admissible set: mode constraint (with the optional
/// pointwise cap), then radial scaling onto the ball.
pub fn project(h: &BoundaryControl, set: &AdmissibleSet) -> BoundaryControl {
    let mut p = h.clone();
    if let Some(m) = set.hmax {
        p.tangential
            .iter_mut()
            .for_each(|t| t.values.iter_mut().for_each(|v| *v = v.clamp(-m, m)));
    }
    match (set.mode, set.hmax) {
        (ControlMode::TangentialOnly, _) => p
            .normal
            .iter_mut()
            .for_each(|n| n.values.iter_mut().for_each(|v| *v = 0.0)),
        (ControlMode::FreeWithZeroFlux, None) => remove_flux(&mut p),
        (ControlMode::FreeWithZeroFlux, Some(m)) => {
            let lens: Vec<f64> = p.grid.boundary_faces().map(|f| f.length).collect();
            p.normal
                .iter_mut()
                .for_each(|n| clamped_shift(&mut n.values, &lens, m));
        }
    }
    let norm = p.norm();
    if norm > set.radius {
        p.scale(set.radius / norm);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub step0: f64,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            step0: 1.0,
            grad_tol: 1e-6,
            cost_tol: 1e-12,
            max_backtracks: 30,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = vec![];
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            errs.push(format!(
                "optimizer.armijo_c1 must lie in (0, 1), got {}",
                self.armijo_c1
            ));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            errs.push(format!(
                "optimizer.backtrack must lie in (0, 1), got {}",
                self.backtrack
            ));
        }
        if !(self.step0 > 0.0) {
            errs.push(format!(
                "optimizer.step0 must be positive, got {}",
                self.step0
            ));
        }
        if !(self.grad_tol >= 0.0) || !(self.cost_tol >= 0.0) {
            errs.push("optimizer tolerances must be non-negative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradTol,
    CostTol,
    MaxIters,
    LineSearchFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::CostTol => "cost_tol",
            Termination::MaxIters => "max_iters",
            Termination::LineSearchFailure => "line_search_failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub h_final: BoundaryControl,
    pub cost_history: Vec<CostBreakdown>,
    /// Projected-gradient residual `|h - P(h - step0 g)| / step0` per iterate.
    pub grad_norm_history: Vec<f64>,
    /// Accepted step length per iteration (0 for the initial entry).
    pub step_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Reduced-cost evaluator bound to one problem.
pub struct Reduced<'a> {
    pub problem: &'a Problem,
    pub scheme: Scheme,
}

impl<'a> Reduced<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        Self {
            scheme: Scheme::new(&problem.cfg, problem.pot),
            problem,
        }
    }

    pub fn cost(&self, h: &BoundaryControl) -> Result<CostBreakdown> {
        let pb = self.problem;
        let traj = solve_forward_with(&self.scheme, &pb.u0, &pb.phi0, h)?;
        eval_cost(&traj, h, &pb.targets)
    }

    pub fn cost_and_gradient(&self, h: &BoundaryControl) -> Result<(CostBreakdown, GradientField)> {
        let pb = self.problem;
        let traj = solve_forward_with(&self.scheme, &pb.u0, &pb.phi0, h)?;
        let cost = eval_cost(&traj, h, &pb.targets)?;
        let adj = solve_adjoint_with(&self.scheme, &traj, &pb.targets)?;
        Ok((cost, reduced_gradient(h, &adj, &traj, &self.scheme)?))
    }
}

/// Project and keep the `t = 0` slice of `keep` (initial compatibility).
fn project_frozen(
    h: &BoundaryControl,
    set: &AdmissibleSet,
    keep: &BoundaryControl,
) -> BoundaryControl {
    let mut p = project(h, set);
    p.tangential[0] = keep.tangential[0].clone();
    p.normal[0] = keep.normal[0].clone();
    p
}

fn residual(h: &BoundaryControl, g: &GradientField, set: &AdmissibleSet, step: f64) -> f64 {
    let mut trial = h.clone();
    trial.axpy(-step, g);
    let mut d = project_frozen(&trial, set, h);
    d.axpy(-1.0, h);
    d.norm() / step
}

/// Projected gradient descent from `problem.control`.
pub fn optimize(
    problem: &Problem,
    set: &AdmissibleSet,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    set.validate()?;
    cfg.validate()?;
    let red = Reduced::new(problem);
    let mut h = project_frozen(&problem.control, set, &problem.control);
    let (mut cost, mut grad) = red.cost_and_gradient(&h)?;
    freeze_initial(&mut grad);
    let mut res = residual(&h, &grad, set, cfg.step0);
    let mut out = OptimizationResult {
        h_final: h.clone(),
        cost_history: vec![cost],
        grad_norm_history: vec![res],
        step_history: vec![0.0],
        iterations: 0,
        termination: Termination::MaxIters,
    };
    let mut step = cfg.step0;
    loop {
        if res <= cfg.grad_tol {
            out.termination = Termination::GradTol;
            break;
        }
        if out.iterations >= cfg.max_iters {
            out.termination = Termination::MaxIters;
            break;
        }
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = h.clone();
            trial.axpy(-step, &grad);
            let trial = project_frozen(&trial, set, &h);
            let mut d = trial.clone();
            d.axpy(-1.0, &h);
            let c = red.cost(&trial)?;
            if c.total <= cost.total + cfg.armijo_c1 * grad.inner(&d) {
                accepted = Some((trial, c));
                break;
            }
            step *= cfg.backtrack;
        }
        let Some((h_new, c_new)) = accepted else {
            out.termination = Termination::LineSearchFailure;
            break;
        };
        let decrease = cost.total - c_new.total;
        h = h_new;
        let (c, mut g) = red.cost_and_gradient(&h)?;
        freeze_initial(&mut g);
        cost = c;
        grad = g;
        res = residual(&h, &grad, set, cfg.step0);
        out.iterations += 1;
        out.cost_history.push(cost);
        out.grad_norm_history.push(res);
        out.step_history.push(step);
        out.h_final = h.clone();
        log::info!(
            "iter {} J = {:.6e} residual = {:.3e} step = {:.3e}",
            out.iterations,
            cost.total,
            res,
            step
        );
        if decrease <= cfg.cost_tol * cost.total.abs() {
            out.termination = Termination::CostTol;
            break;
        }
        step = (step / cfg.backtrack).min(cfg.step0);
    }
    Ok(out)
}

fn freeze_initial(g: &mut GradientField) {
    g.tangential[0].values.iter_mut().for_each(|v| *v = 0.0);
    g.normal[0].values.iter_mut().for_each(|v| *v = 0.0);
}
