//! Receding-horizon control on top of the open-loop solver.
//!
//! At `tau_m = m tau` the plant state is read exactly, an optimal control problem is
//! solved on `[tau_m, tau_m + t_hat]` against the predictor (shifted to `[0, t_hat]`,
//! the dynamics being autonomous), and the first `tau` of its solution drives the plant
//! up to `min(tau_{m+1}, T)`. The next window is warm-started with the previous solution
//! shifted left by `tau` and zero-filled at the end.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::adjoint::{total_cost, CostBreakdown};
use crate::dynamics::{derive_seed, format_time, integrate_forward, sample_batch_schedule, ControlSchedule, Grid, ModelParams, Mode, State, Trajectory};
use crate::error::{Error, Result};
use crate::optimizer::{solve_ocp, GdConfig, Termination};
use crate::stochastic::{integrate_sde_with, BrownianIncrements, SdeParams};

/// Model used inside each window's optimisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Full,
    /// Batch-reduced model; window `m` freezes a fresh schedule seeded by
    /// `derive_seed(seed, m)`.
    Rbm { batch_size: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub tau: f64,
    pub t_hat: f64,
    pub total_horizon: f64,
    pub predictor: Predictor,
    #[serde(default)]
    pub gd: GdConfig,
}

/// The system the control is applied to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantKind {
    Deterministic,
    Noisy(SdeParams),
}

/// Step ranges of one window on the global grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpan {
    pub start: usize,
    /// End of the predictive horizon (may exceed the plant horizon).
    pub predict_end: usize,
    /// End of the applied segment, truncated at the plant horizon.
    pub apply_end: usize,
}

/// Windows for a plant horizon of `total` steps, applying `tau` steps out of `t_hat`.
pub fn window_plan(total: usize, tau: usize, t_hat: usize) -> Vec<WindowSpan> {
    (0..)
        .map(|m| m * tau)
        .take_while(|&start| start < total)
        .map(|start| WindowSpan {
            start,
            predict_end: start + t_hat,
            apply_end: (start + tau).min(total),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub window: usize,
    pub t_start: f64,
    pub t_predict_end: f64,
    pub t_apply_end: f64,
    pub gd_iters: usize,
    pub ev_calculations: usize,
    /// Optimised cost on the predictor over the window's predictive horizon.
    pub window_cost: f64,
    pub wall_time: f64,
    pub termination: Termination,
    pub batch_seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopResult {
    pub plant_trajectory: Trajectory,
    pub applied_control: ControlSchedule,
    pub window_reports: Vec<WindowReport>,
    pub realized_cost: CostBreakdown,
    /// Optimal control of each window over its full predictive horizon.
    pub window_controls: Vec<ControlSchedule>,
}

impl ClosedLoopResult {
    pub fn write_window_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "window,t_start,gd_iters,window_cost,wall_time")?;
        for r in &self.window_reports {
            writeln!(w, "{},{},{},{},{}", r.window, format_time(r.t_start), r.gd_iters, r.window_cost, r.wall_time)?;
        }
        Ok(())
    }
}

/// Run the closed loop over `grid` (which covers `[0, T]`).
///
/// `u0` is the guess for the first window and must cover `t_hat`.
pub fn run_mpc(s0: &State, u0: &ControlSchedule, mp: &ModelParams, grid: &Grid, cfg: &MpcConfig, plant: PlantKind) -> Result<ClosedLoopResult> {
    mp.validate()?;
    cfg.gd.validate()?;
    if !(cfg.tau > 0.0 && cfg.tau <= cfg.t_hat + 1e-12 && cfg.total_horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "MPC needs 0 < tau <= t_hat and T > 0 (got tau = {}, t_hat = {}, T = {})",
            cfg.tau, cfg.t_hat, cfg.total_horizon
        )));
    }
    let tau_steps = grid.steps_for(cfg.tau, "tau")?;
    let hat_steps = grid.steps_for(cfg.t_hat, "t_hat")?;
    let total = grid.steps_for(cfg.total_horizon, "total_horizon")?;
    if total != grid.n_steps {
        return Err(Error::ScheduleMismatch(format!(
            "grid has {} steps but total_horizon spans {total}",
            grid.n_steps
        )));
    }
    if u0.n_steps() != hat_steps {
        return Err(Error::ScheduleMismatch(format!(
            "initial guess covers {} steps, predictive horizon needs {hat_steps}",
            u0.n_steps()
        )));
    }
    let noise = match plant {
        PlantKind::Deterministic => None,
        PlantKind::Noisy(sp) => {
            sp.validate()?;
            Some((sp.sigma, BrownianIncrements::sample(sp.seed, total, mp.n_evaders, grid.dt)))
        }
    };

    let window_grid = Grid::with_steps(grid.dt, hat_steps);
    let mut states = vec![s0.clone()];
    let mut applied = ControlSchedule::zeros(0, mp.n_drivers, mp.dim);
    let mut reports = Vec::new();
    let mut window_controls = Vec::new();
    let mut guess = u0.clone();

    for (m, span) in window_plan(total, tau_steps, hat_steps).into_iter().enumerate() {
        let tag = |e: Error| Error::Window {
            window: m,
            source: Box::new(e),
        };
        let state_now = states.last().expect("nonempty").clone();
        let schedule = match cfg.predictor {
            Predictor::Full => None,
            Predictor::Rbm { batch_size, seed } => {
                let s = derive_seed(seed, m as u64);
                Some(sample_batch_schedule(s, mp.n_evaders, batch_size, hat_steps).map_err(tag)?)
            }
        };
        let mode = schedule.as_ref().map_or(Mode::Full, Mode::Rbm);
        let ocp = solve_ocp(&state_now, &guess, &window_grid, mp, mode, &cfg.gd).map_err(tag)?;

        let len = span.apply_end - span.start;
        let segment = ocp.u_opt.slice(0, len);
        let seg_grid = Grid::with_steps(grid.dt, len);
        let seg = match &noise {
            None => integrate_forward(&state_now, &segment, &seg_grid, mp, Mode::Full),
            Some((sigma, incs)) => integrate_sde_with(&state_now, &segment, &seg_grid, mp, *sigma, incs, span.start),
        }
        .map_err(tag)?;
        states.extend(seg.states.into_iter().skip(1));
        applied.values.extend_from_slice(&segment.values);

        reports.push(WindowReport {
            window: m,
            t_start: grid.time(span.start),
            t_predict_end: grid.time(span.predict_end),
            t_apply_end: grid.time(span.apply_end),
            gd_iters: ocp.gd_iterations,
            ev_calculations: ocp.ev_calculations,
            window_cost: ocp.final_cost.total,
            wall_time: ocp.wall_time,
            termination: ocp.termination,
            batch_seed: schedule.as_ref().map(|s| s.seed),
        });
        guess = ocp.u_opt.shifted(tau_steps);
        window_controls.push(ocp.u_opt);
    }

    let plant_trajectory = Trajectory { grid: *grid, states };
    let realized_cost = total_cost(&plant_trajectory, &applied, &mp.cost);
    Ok(ClosedLoopResult {
        plant_trajectory,
        applied_control: applied,
        window_reports: reports,
        realized_cost,
        window_controls,
    })
}
