//! Experiment drivers behind the command-line subcommands.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adjoint::{total_cost, CostBreakdown};
use crate::dynamics::{derive_seed, integrate_forward, interaction_count, sample_batch_schedule, BatchSchedule, Mode, State, Trajectory};
use crate::error::{Error, Result};
use crate::harness::config::{Resolved, RunMode};
use crate::harness::stats::{mean, median, Band};
use crate::mpc::{run_mpc, ClosedLoopResult};
use crate::optimizer::{solve_ocp, OcpResult};
use crate::stochastic::integrate_sde;

fn schedule_for(r: &Resolved, mode: RunMode) -> Result<Option<BatchSchedule>> {
    match mode {
        RunMode::Full => Ok(None),
        RunMode::Rbm => {
            let rb = r.rbm()?;
            Ok(Some(sample_batch_schedule(rb.seed, r.model.n_evaders, rb.batch_size, r.grid.n_steps)?))
        }
    }
}

fn as_mode(schedule: &Option<BatchSchedule>) -> Mode<'_> {
    match schedule {
        Some(s) => Mode::Rbm(s),
        None => Mode::Full,
    }
}

pub struct SimulationOutput {
    pub trajectory: Trajectory,
    pub cost: CostBreakdown,
    pub mode: RunMode,
    pub batch_seed: Option<u64>,
    pub noise_seed: Option<u64>,
    pub wall_time: f64,
}

impl SimulationOutput {
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "command": "simulate",
            "mode": self.mode,
            "batch_seed": self.batch_seed,
            "noise_seed": self.noise_seed,
            "n_steps": self.trajectory.grid.n_steps,
            "cost": self.cost,
            "wall_time": self.wall_time,
        })
    }
}

/// Integrate the configured initial data and control.
///
/// With an `[sde]` section the full noisy system is integrated instead (full mode only).
pub fn simulate(r: &Resolved, mode: RunMode) -> Result<SimulationOutput> {
    let start = Instant::now();
    let (trajectory, batch_seed, noise_seed) = match (&r.config.sde, mode) {
        (Some(sp), RunMode::Full) => (integrate_sde(&r.initial, &r.control, &r.grid, &r.model, sp)?, None, Some(sp.seed)),
        (Some(_), RunMode::Rbm) => {
            return Err(Error::Config("the noisy plant ([sde]) is only simulated in full mode".into()));
        }
        (None, _) => {
            let schedule = schedule_for(r, mode)?;
            let traj = integrate_forward(&r.initial, &r.control, &r.grid, &r.model, as_mode(&schedule))?;
            (traj, schedule.map(|s| s.seed), None)
        }
    };
    let wall_time = start.elapsed().as_secs_f64();
    let cost = total_cost(&trajectory, &r.control, &r.model.cost);
    Ok(SimulationOutput {
        trajectory,
        cost,
        mode,
        batch_seed,
        noise_seed,
        wall_time,
    })
}

/// How per-evader deviations are averaged into one error per time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    /// `sqrt(mean_i |a_i - b_i|^2)`.
    #[default]
    Rms,
    /// `mean_i |a_i - b_i|`.
    MeanNorm,
}

impl ErrorMetric {
    pub fn eval(self, a: &[f64], b: &[f64], dim: usize) -> f64 {
        let n = a.len() / dim;
        let sq = a.chunks(dim).zip(b.chunks(dim)).map(|(p, q)| p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>());
        match self {
            ErrorMetric::Rms => (sq.sum::<f64>() / n as f64).sqrt(),
            ErrorMetric::MeanNorm => sq.map(f64::sqrt).sum::<f64>() / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub batch_size: usize,
    pub step: usize,
    pub t: f64,
    pub position: Band,
    pub velocity: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStudyReport {
    pub metric: ErrorMetric,
    pub replicas: usize,
    pub base_seed: u64,
    pub rows: Vec<ErrorRow>,
}

impl ErrorStudyReport {
    /// Row for batch size `p` at grid step `step`, if it was recorded.
    pub fn row(&self, p: usize, step: usize) -> Option<&ErrorRow> {
        self.rows.iter().find(|r| r.batch_size == p && r.step == step)
    }

    pub fn summary(&self) -> serde_json::Value {
        let mut finals = serde_json::Map::new();
        let last = self.rows.iter().map(|r| r.step).max().unwrap_or(0);
        for r in self.rows.iter().filter(|r| r.step == last) {
            finals.insert(
                format!("P={}", r.batch_size),
                json!({"position_median": r.position.median, "velocity_median": r.velocity.median}),
            );
        }
        json!({
            "command": "rbm-error-study",
            "metric": self.metric,
            "replicas": self.replicas,
            "base_seed": self.base_seed,
            "final": finals,
        })
    }
}

/// Seed of replica `rep` for batch size `p`.
pub fn replica_seed(base: u64, p: usize, rep: usize) -> u64 {
    derive_seed(derive_seed(base, p as u64), rep as u64)
}

/// Compare independent batch-reduced runs against the full trajectory.
///
/// Replica `k` of batch size `P` uses [`replica_seed`]`(base, P, k)`. Rows are kept at
/// every `save_stride`-th step and at the final step.
pub fn rbm_error_study(r: &Resolved, batch_sizes: &[usize], replicas: usize, base_seed: u64, metric: ErrorMetric) -> Result<ErrorStudyReport> {
    if replicas < 2 {
        return Err(Error::Config(format!("replicas = {replicas} must be >= 2")));
    }
    let n = r.model.n_evaders;
    if let Some(&p) = batch_sizes.iter().find(|&&p| p < 2 || p > n) {
        return Err(Error::Config(format!("batch size {p} must lie in [2, model.n_evaders = {n}]")));
    }
    let d = r.model.dim;
    let stride = r.config.save_stride.max(1);
    let last = r.grid.n_steps;
    let steps: Vec<usize> = (0..=last).filter(|k| k % stride == 0 || *k == last).collect();
    let full = integrate_forward(&r.initial, &r.control, &r.grid, &r.model, Mode::Full)?;

    let errors_of = |traj: &Trajectory| -> (Vec<f64>, Vec<f64>) {
        steps
            .iter()
            .map(|&k| {
                let (a, b) = (&traj.states[k], &full.states[k]);
                (metric.eval(&a.x, &b.x, d), metric.eval(&a.v, &b.v, d))
            })
            .unzip()
    };

    let mut rows = Vec::new();
    for &p in batch_sizes {
        let per_rep: Vec<(Vec<f64>, Vec<f64>)> = (0..replicas)
            .into_par_iter()
            .map(|rep| {
                let sched = sample_batch_schedule(replica_seed(base_seed, p, rep), n, p, r.grid.n_steps)?;
                let traj = integrate_forward(&r.initial, &r.control, &r.grid, &r.model, Mode::Rbm(&sched))?;
                Ok(errors_of(&traj))
            })
            .collect::<Result<_>>()?;
        for (col, &k) in steps.iter().enumerate() {
            let xs: Vec<f64> = per_rep.iter().map(|e| e.0[col]).collect();
            let vs: Vec<f64> = per_rep.iter().map(|e| e.1[col]).collect();
            rows.push(ErrorRow {
                batch_size: p,
                step: k,
                t: r.grid.time(k),
                position: Band::from_sample(&xs),
                velocity: Band::from_sample(&vs),
            });
        }
    }
    Ok(ErrorStudyReport {
        metric,
        replicas,
        base_seed,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    /// `"Full"` or `"P=<size>"`.
    pub label: String,
    pub batch_size: Option<usize>,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// `mean_ms` over the `P=2` row's `mean_ms`.
    pub time_ratio: f64,
    pub interactions: u64,
    pub count_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub repetitions: usize,
    pub warmup: usize,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub fn row(&self, label: &str) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn summary(&self) -> serde_json::Value {
        json!({"command": "benchmark", "repetitions": self.repetitions, "warmup": self.warmup, "rows": self.rows})
    }
}

/// Time forward integration in full mode and for each batch size.
///
/// Schedules are sampled before timing. Repetitions visit the modes round-robin so slow
/// drifts in machine load hit every mode alike. The `P=2` row is the ratio baseline and
/// is added when missing.
pub fn benchmark(r: &Resolved, batch_sizes: &[usize], repetitions: usize, warmup: usize) -> Result<BenchmarkReport> {
    if repetitions < 10 {
        return Err(Error::Config(format!("repetitions = {repetitions} must be >= 10")));
    }
    let n = r.model.n_evaders;
    let mut sizes: Vec<usize> = batch_sizes.to_vec();
    if !sizes.contains(&2) {
        sizes.push(2);
    }
    sizes.sort_unstable();
    sizes.dedup();
    if let Some(&p) = sizes.iter().find(|&&p| p > n) {
        return Err(Error::Config(format!("batch size {p} exceeds model.n_evaders = {n}")));
    }
    let seed = r.config.rbm.as_ref().map_or(0, |rb| rb.seed);
    let mut schedules: Vec<Option<BatchSchedule>> = vec![None];
    for &p in &sizes {
        schedules.push(Some(sample_batch_schedule(derive_seed(seed, p as u64), n, p, r.grid.n_steps)?));
    }
    let run = |s: &Option<BatchSchedule>| -> Result<f64> {
        let t0 = Instant::now();
        let traj = integrate_forward(&r.initial, &r.control, &r.grid, &r.model, as_mode(s))?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(traj);
        Ok(ms)
    };
    for _ in 0..warmup {
        for s in &schedules {
            run(s)?;
        }
    }
    let mut times = vec![Vec::with_capacity(repetitions); schedules.len()];
    for _ in 0..repetitions {
        for (slot, s) in times.iter_mut().zip(&schedules) {
            slot.push(run(s)?);
        }
    }
    let (m, d) = (r.model.n_drivers, r.model.dim);
    let base_idx = 1 + sizes.iter().position(|&p| p == 2).expect("P=2 inserted above");
    let base_ms = mean(&times[base_idx]);
    let base_count = interaction_count(n, m, d, 2) as f64;
    let rows = schedules
        .iter()
        .zip(&times)
        .map(|(s, t)| {
            let p = s.as_ref().map(|s| s.batch_size);
            let interactions = interaction_count(n, m, d, p.unwrap_or(n));
            let mean_ms = mean(t);
            BenchmarkRow {
                label: p.map_or_else(|| "Full".to_string(), |p| format!("P={p}")),
                batch_size: p,
                mean_ms,
                median_ms: median(t),
                time_ratio: mean_ms / base_ms,
                interactions,
                count_ratio: interactions as f64 / base_count,
            }
        })
        .collect();
    Ok(BenchmarkReport { repetitions, warmup, rows })
}

pub struct OptimizeOutput {
    pub result: OcpResult,
    pub mode: RunMode,
    pub batch_seed: Option<u64>,
    /// Cost of the optimised control on the full model.
    pub replay_full: CostBreakdown,
}

impl OptimizeOutput {
    /// Counters in the layout of the optimisation tables.
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "command": "optimize",
            "mode": self.mode,
            "batch_seed": self.batch_seed,
            "gd_iterations": self.result.gd_iterations,
            "ev_calculations": self.result.ev_calculations,
            "wall_time": self.result.wall_time,
            "termination": self.result.termination,
            "cost": self.result.final_cost,
            "cost_replayed_full": self.replay_full,
        })
    }
}

/// Optimise the configured control as initial guess, then replay the optimum on the full model.
pub fn optimize(r: &Resolved, mode: RunMode) -> Result<OptimizeOutput> {
    let schedule = schedule_for(r, mode)?;
    let result = solve_ocp(&r.initial, &r.control, &r.grid, &r.model, as_mode(&schedule), &r.config.gd)?;
    let replay_full = replay(&r.initial, &result, r)?;
    Ok(OptimizeOutput {
        result,
        mode,
        batch_seed: schedule.map(|s| s.seed),
        replay_full,
    })
}

fn replay(s0: &State, res: &OcpResult, r: &Resolved) -> Result<CostBreakdown> {
    let traj = integrate_forward(s0, &res.u_opt, &r.grid, &r.model, Mode::Full)?;
    Ok(total_cost(&traj, &res.u_opt, &r.model.cost))
}

/// Run the configured closed loop. The configured control, cut or extended to `t_hat`,
/// is the first window's guess.
pub fn closed_loop(r: &Resolved) -> Result<ClosedLoopResult> {
    let (cfg, plant, guess) = r.mpc()?;
    run_mpc(&r.initial, &guess, &r.model, &r.grid, &cfg, plant)
}

/// Summary record of a closed-loop run.
pub fn closed_loop_summary(res: &ClosedLoopResult) -> serde_json::Value {
    json!({
        "command": "mpc",
        "realized_cost": res.realized_cost,
        "windows": res.window_reports,
    })
}
