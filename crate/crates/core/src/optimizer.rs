//! Gradient descent with a halving/doubling step size on a fixed horizon.
//!
//! A trial `u - alpha * grad J` is accepted when it lowers the cost by at least the
//! relative ratio `decrease_ratio`; otherwise `alpha` is halved and the trial repeated.
//! After an accepted step the next search starts from `2 alpha`. The search stops once
//! `alpha < alpha_min`, the relative decrease falls below `cost_tol`, or `max_iters`
//! accepted steps have been taken.
//!
//! The descent direction is the `L^2(0, T)` gradient of the cost, i.e. the exact
//! discrete gradient divided by `dt`, which keeps `alpha` independent of the grid.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{control_gradient, integrate_costate, total_cost, CostBreakdown};
use crate::dynamics::{integrate_forward, ControlSchedule, Grid, ModelParams, Mode, State, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub alpha0: f64,
    pub decrease_ratio: f64,
    pub alpha_min: f64,
    pub max_iters: usize,
    pub cost_tol: f64,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.1,
            decrease_ratio: 1e-6,
            alpha_min: 1e-15,
            max_iters: 20_000,
            cost_tol: 1e-6,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |r: f64| r > 0.0 && r < 1.0;
        if !(self.alpha0 > self.alpha_min && self.alpha_min > 0.0)
            || !in_unit(self.decrease_ratio)
            || !in_unit(self.cost_tol)
        {
            return Err(Error::InvalidParameter(format!(
                "gradient descent needs alpha0 > alpha_min > 0 and ratios in (0, 1), got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Why the descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Step size fell below `alpha_min` without an acceptable trial.
    StepFloor,
    /// Relative cost decrease below `cost_tol`.
    CostTolerance,
    /// The gradient vanished exactly.
    Stationary,
    /// Safety cap reached before convergence.
    MaxIters,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub alpha: f64,
    pub ev_count: usize,
}

#[derive(Debug, Clone)]
pub struct OcpResult {
    pub u_opt: ControlSchedule,
    /// Cost of the guess followed by every accepted iterate.
    pub cost_history: Vec<f64>,
    pub gd_iterations: usize,
    /// Forward evolutions, line-search trials included.
    pub ev_calculations: usize,
    pub wall_time: f64,
    pub termination: Termination,
    /// Cost of `u_opt` on the model it was optimised against.
    pub final_cost: CostBreakdown,
    pub log: Vec<IterRecord>,
}

impl OcpResult {
    pub fn write_log_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,cost,alpha,ev_count")?;
        for r in &self.log {
            writeln!(w, "{},{},{},{}", r.iter, r.cost, r.alpha, r.ev_count)?;
        }
        Ok(())
    }
}

struct Evaluated {
    traj: Trajectory,
    cost: CostBreakdown,
}

fn evaluate(s0: &State, u: &ControlSchedule, grid: &Grid, mp: &ModelParams, mode: Mode<'_>) -> Result<Evaluated> {
    let traj = integrate_forward(s0, u, grid, mp, mode)?;
    let cost = total_cost(&traj, u, &mp.cost);
    Ok(Evaluated { traj, cost })
}

/// `L^2` gradient of the cost at an already integrated iterate.
fn l2_gradient(ev: &Evaluated, u: &ControlSchedule, grid: &Grid, mp: &ModelParams, mode: Mode<'_>) -> Result<ControlSchedule> {
    let co = integrate_costate(&ev.traj, u, mp, mode)?;
    let mut g = control_gradient(&co, u, &mp.cost, grid);
    let inv_dt = 1.0 / grid.dt;
    g.values.iter_mut().for_each(|c| *c *= inv_dt);
    Ok(g)
}

/// Minimise the discrete cost over the control, starting from `u_guess`.
///
/// In batch mode the schedule stays fixed for the whole optimisation.
pub fn solve_ocp(
    s0: &State,
    u_guess: &ControlSchedule,
    grid: &Grid,
    mp: &ModelParams,
    mode: Mode<'_>,
    cfg: &GdConfig,
) -> Result<OcpResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut u = u_guess.clone();
    let mut current = evaluate(s0, &u, grid, mp, mode)?;
    let mut ev_calculations = 1;
    if !current.cost.total.is_finite() {
        return Err(Error::OptimizationFailed {
            iter: 0,
            reason: format!("initial cost is {}", current.cost.total),
        });
    }
    let mut cost_history = vec![current.cost.total];
    let mut log = vec![IterRecord {
        iter: 0,
        cost: current.cost.total,
        alpha: 0.0,
        ev_count: ev_calculations,
    }];
    let mut alpha = cfg.alpha0;
    let mut gd_iterations = 0;

    let termination = 'outer: loop {
        if gd_iterations >= cfg.max_iters {
            break Termination::MaxIters;
        }
        let grad = l2_gradient(&current, &u, grid, mp, mode)?;
        if !grad.is_finite() {
            return Err(Error::OptimizationFailed {
                iter: gd_iterations,
                reason: "non-finite gradient".into(),
            });
        }
        if grad.values.iter().all(|g| *g == 0.0) {
            break Termination::Stationary;
        }
        let threshold = current.cost.total * (1.0 - cfg.decrease_ratio);
        let (trial_u, trial) = loop {
            if alpha < cfg.alpha_min {
                break 'outer Termination::StepFloor;
            }
            let mut trial_u = u.clone();
            for (t, g) in trial_u.values.iter_mut().zip(&grad.values) {
                *t -= alpha * g;
            }
            ev_calculations += 1;
            // a trial that collides or blows up is treated like any other rejected step
            match evaluate(s0, &trial_u, grid, mp, mode) {
                Ok(trial) if trial.cost.total.is_finite() && trial.cost.total <= threshold => break (trial_u, trial),
                _ => alpha *= 0.5,
            }
        };
        let previous = current.cost.total;
        u = trial_u;
        current = trial;
        gd_iterations += 1;
        cost_history.push(current.cost.total);
        log.push(IterRecord {
            iter: gd_iterations,
            cost: current.cost.total,
            alpha,
            ev_count: ev_calculations,
        });
        if previous > 0.0 && (previous - current.cost.total) / previous < cfg.cost_tol {
            break Termination::CostTolerance;
        }
        alpha *= 2.0;
    };

    Ok(OcpResult {
        u_opt: u,
        cost_history,
        gd_iterations,
        ev_calculations,
        wall_time: start.elapsed().as_secs_f64(),
        termination,
        final_cost: current.cost,
        log,
    })
}
