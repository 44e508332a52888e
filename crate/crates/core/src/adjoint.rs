//! Running cost, backward costate sweep and control gradient.
//!
//! The cost is the left-endpoint quadrature `J = sum_n dt L(s_n, u_n)` of
//!
//! ```text
//! L = (a1/N) sum_k |x_k - x_f|^2 + (a2/M) sum_j |u_j|^2 + (a3/M) sum_j |y_j - x_f|^2
//! ```
//!
//! The costates `(p, q, r)` are the exact discrete adjoint of the explicit Euler
//! update: with zero terminal data,
//!
//! ```text
//! p_n = p_{n+1} + dt [ grad_x L_n + (dF_v/dx)^T q_{n+1} ]
//! q_n = q_{n+1} + dt [ p_{n+1} + (dF_v/dv)^T q_{n+1} ]
//! r_n = r_{n+1} + dt [ grad_y L_n + (dF_v/dy)^T q_{n+1} ]
//! ```
//!
//! so `dJ/du_n = dt (r_{n+1} + (2 a2 / M) u_n)` holds to round-off. In batch mode the
//! step from `n + 1` back to `n` reuses partition `n`, i.e. the forward partitions are
//! traversed in reverse.

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, CostParams, Grid, ModelParams, Mode, State, Trajectory};
use crate::error::{Error, Result};
use crate::kernels::{g_term, norm_sq, KernelParams, RadialTerm};

/// Cost split by term. `total` is the sum of the other three.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub tracking: f64,
    pub control_effort: f64,
    pub driver_tracking: f64,
    pub total: f64,
}

impl CostBreakdown {
    fn add_scaled(&mut self, other: &CostBreakdown, w: f64) {
        self.tracking += w * other.tracking;
        self.control_effort += w * other.control_effort;
        self.driver_tracking += w * other.driver_tracking;
        self.total = self.tracking + self.control_effort + self.driver_tracking;
    }
}

fn mean_sq_dist(points: &[f64], target: &[f64]) -> f64 {
    let d = target.len();
    let count = points.len() / d;
    let sum: f64 = points
        .chunks(d)
        .map(|p| p.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    sum / count as f64
}

/// The integrand `L` split into its three terms.
pub fn running_cost_terms(s: &State, u_now: &[f64], cp: &CostParams) -> CostBreakdown {
    let m = s.n_drivers() as f64;
    let tracking = cp.alpha1 * mean_sq_dist(&s.x, &cp.target);
    let control_effort = cp.alpha2 * norm_sq(u_now) / m;
    let driver_tracking = cp.alpha3 * mean_sq_dist(&s.y, &cp.target);
    CostBreakdown {
        tracking,
        control_effort,
        driver_tracking,
        total: tracking + control_effort + driver_tracking,
    }
}

/// The integrand `L(s, u)`.
pub fn running_cost(s: &State, u_now: &[f64], cp: &CostParams) -> f64 {
    running_cost_terms(s, u_now, cp).total
}

/// Left-endpoint rectangle rule over the trajectory's grid.
pub fn total_cost(traj: &Trajectory, u: &ControlSchedule, cp: &CostParams) -> CostBreakdown {
    let mut acc = CostBreakdown::default();
    for n in 0..traj.grid.n_steps {
        acc.add_scaled(&running_cost_terms(&traj.states[n], u.at(n), cp), traj.grid.dt);
    }
    acc
}

/// Adjoint variables of `(x, v, y)` on the grid, flattened `(n_steps + 1) x N x d`
/// (`M x d` for `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub n_evaders: usize,
    pub n_drivers: usize,
    pub dim: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl CostateTrajectory {
    fn zeros(n_steps: usize, n: usize, m: usize, d: usize) -> Self {
        Self {
            n_evaders: n,
            n_drivers: m,
            dim: d,
            p: vec![0.0; (n_steps + 1) * n * d],
            q: vec![0.0; (n_steps + 1) * n * d],
            r: vec![0.0; (n_steps + 1) * m * d],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.r.len() / (self.n_drivers * self.dim) - 1
    }

    pub fn p_at(&self, n: usize) -> &[f64] {
        let w = self.n_evaders * self.dim;
        &self.p[n * w..(n + 1) * w]
    }

    pub fn q_at(&self, n: usize) -> &[f64] {
        let w = self.n_evaders * self.dim;
        &self.q[n * w..(n + 1) * w]
    }

    pub fn r_at(&self, n: usize) -> &[f64] {
        let w = self.n_drivers * self.dim;
        &self.r[n * w..(n + 1) * w]
    }
}

/// Scratch for one backward step: transposed Jacobian products with `q_{n+1}`.
struct Pullback {
    adj_x: Vec<f64>,
    adj_v: Vec<f64>,
    adj_y: Vec<f64>,
    r: Vec<f64>,
    w: Vec<f64>,
}

impl Pullback {
    fn new(n: usize, m: usize, d: usize) -> Self {
        Self {
            adj_x: vec![0.0; n * d],
            adj_v: vec![0.0; n * d],
            adj_y: vec![0.0; m * d],
            r: vec![0.0; d],
            w: vec![0.0; d],
        }
    }

    fn clear(&mut self) {
        self.adj_x.iter_mut().for_each(|c| *c = 0.0);
        self.adj_v.iter_mut().for_each(|c| *c = 0.0);
        self.adj_y.iter_mut().for_each(|c| *c = 0.0);
    }

    /// Evader-evader terms of one batch.
    fn batch(&mut self, members: &[usize], s: &State, kp: &KernelParams, q: &[f64]) -> Result<()> {
        let len = members.len();
        if len < 2 {
            return Ok(());
        }
        let d = s.dim;
        let c = 1.0 / (len - 1) as f64;
        let ca = c * kp.a_const;
        for (pos, &i) in members.iter().enumerate() {
            for &k in &members[pos + 1..] {
                for e in 0..d {
                    self.r[e] = s.x[k * d + e] - s.x[i * d + e];
                    // the pair force enters dv_i with + and dv_k with -
                    self.w[e] = q[i * d + e] - q[k * d + e];
                }
                let (_, g) = g_term(&self.r, kp, i, k)?;
                let (head, tail) = (i * d, k * d);
                g.add_jac_t_mul(&self.r, &self.w, c, &mut self.adj_x[tail..tail + d]);
                g.add_jac_t_mul(&self.r, &self.w, -c, &mut self.adj_x[head..head + d]);
                for e in 0..d {
                    self.adj_v[tail + e] += ca * self.w[e];
                    self.adj_v[head + e] -= ca * self.w[e];
                }
            }
        }
        Ok(())
    }

    /// Driver repulsion terms.
    fn drivers(&mut self, s: &State, kp: &KernelParams, q: &[f64]) {
        let d = s.dim;
        let inv_m = 1.0 / s.n_drivers() as f64;
        for i in 0..s.n_evaders() {
            let qi = &q[i * d..(i + 1) * d];
            for j in 0..s.n_drivers() {
                for e in 0..d {
                    self.r[e] = s.y[j * d + e] - s.x[i * d + e];
                }
                let f = RadialTerm::f(norm_sq(&self.r), kp);
                f.add_jac_t_mul(&self.r, qi, -inv_m, &mut self.adj_y[j * d..(j + 1) * d]);
                f.add_jac_t_mul(&self.r, qi, inv_m, &mut self.adj_x[i * d..(i + 1) * d]);
            }
        }
    }
}

/// Backward sweep of the discrete adjoint from zero terminal data.
///
/// `traj` must come from [`integrate_forward`](crate::dynamics::integrate_forward)
/// with the same control and mode; in batch mode that means the identical schedule.
pub fn integrate_costate(traj: &Trajectory, u: &ControlSchedule, mp: &ModelParams, mode: Mode<'_>) -> Result<CostateTrajectory> {
    let grid = traj.grid;
    let (n, m, d) = (mp.n_evaders, mp.n_drivers, mp.dim);
    if traj.states.len() != grid.n_steps + 1 || u.n_steps() != grid.n_steps {
        return Err(Error::ScheduleMismatch(format!(
            "trajectory has {} states and control {} steps for a grid of {} steps",
            traj.states.len(),
            u.n_steps(),
            grid.n_steps
        )));
    }
    traj.states[0].check_model(mp)?;
    mode.check(grid.n_steps, n)?;

    let dt = grid.dt;
    let cp = &mp.cost;
    let kp = &mp.kernel;
    let all: Vec<usize> = (0..n).collect();
    let mut co = CostateTrajectory::zeros(grid.n_steps, n, m, d);
    let mut pb = Pullback::new(n, m, d);
    let (wx, wy) = (n * d, m * d);
    let gx = 2.0 * cp.alpha1 / n as f64;
    let gy = 2.0 * cp.alpha3 / m as f64;

    for step in (0..grid.n_steps).rev() {
        let s = &traj.states[step];
        let (p_lo, p_hi) = co.p.split_at_mut((step + 1) * wx);
        let (q_lo, q_hi) = co.q.split_at_mut((step + 1) * wx);
        let (r_lo, r_hi) = co.r.split_at_mut((step + 1) * wy);
        let (p_next, q_next, r_next) = (&p_hi[..wx], &q_hi[..wx], &r_hi[..wy]);
        let (p_now, q_now, r_now) = (&mut p_lo[step * wx..], &mut q_lo[step * wx..], &mut r_lo[step * wy..]);

        pb.clear();
        let res = match mode {
            Mode::Full => pb.batch(&all, s, kp, q_next),
            Mode::Rbm(bs) => bs.partitions[step].iter().try_for_each(|b| pb.batch(b, s, kp, q_next)),
        };
        res.map_err(|e| Error::Integration {
            step,
            source: Box::new(e),
        })?;
        pb.drivers(s, kp, q_next);

        for idx in 0..wx {
            let e = idx % d;
            let grad_l = gx * (s.x[idx] - cp.target[e]);
            p_now[idx] = p_next[idx] + dt * (grad_l + pb.adj_x[idx]);
            q_now[idx] = q_next[idx] + dt * (p_next[idx] + pb.adj_v[idx]);
        }
        for idx in 0..wy {
            let e = idx % d;
            let grad_l = gy * (s.y[idx] - cp.target[e]);
            r_now[idx] = r_next[idx] + dt * (grad_l + pb.adj_y[idx]);
        }
    }
    Ok(co)
}

/// Exact derivative of the discrete cost with respect to every control entry:
/// `dJ/du_n = dt (r_{n+1} + (2 a2 / M) u_n)`.
pub fn control_gradient(costate: &CostateTrajectory, u: &ControlSchedule, cp: &CostParams, grid: &Grid) -> ControlSchedule {
    let mut grad = ControlSchedule::zeros(grid.n_steps, u.n_drivers, u.dim);
    let w = 2.0 * cp.alpha2 / u.n_drivers as f64;
    for n in 0..grid.n_steps {
        let r = costate.r_at(n + 1);
        for ((g, ri), ui) in grad.at_mut(n).iter_mut().zip(r).zip(u.at(n)) {
            *g = grid.dt * (ri + w * ui);
        }
    }
    grad
}

/// Cost and exact gradient of `u` under `mode` in one forward/backward pass.
pub fn cost_and_gradient(
    s0: &State,
    u: &ControlSchedule,
    grid: &Grid,
    mp: &ModelParams,
    mode: Mode<'_>,
) -> Result<(CostBreakdown, ControlSchedule)> {
    let traj = crate::dynamics::integrate_forward(s0, u, grid, mp, mode)?;
    let cost = total_cost(&traj, u, &mp.cost);
    let co = integrate_costate(&traj, u, mp, mode)?;
    Ok((cost, control_gradient(&co, u, &mp.cost, grid)))
}
