//! Forward evolution of the evader/driver system.
//!
//! Evaders carry a position `x_i` and a velocity `v_i`; drivers carry a position `y_j`
//! whose velocity is the control `u_j`. The evader acceleration is
//!
//! ```text
//! dv_i = c_i * sum_{k ~ i} [ a (v_k - v_i) + g(x_k - x_i)(x_k - x_i) ]
//!        - (1/M) * sum_j f(y_j - x_i)(y_j - x_i)
//! ```
//!
//! where `k ~ i` runs over every other evader with `c_i = 1/(N-1)` for the full
//! system, or over the members of `i`'s random batch with `c_i = 1/(|batch| - 1)` for
//! the random batch reduction. Both are advanced with explicit Euler on a uniform grid.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{g_term, norm_sq, KernelParams, RadialTerm};

/// Name of the generator behind every random draw in this crate.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th independent stream under `base` (replicas, MPC windows).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Weights of the running cost and the target point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Evader tracking weight.
    pub alpha1: f64,
    /// Control effort weight.
    pub alpha2: f64,
    /// Driver tracking weight.
    pub alpha3: f64,
    pub target: Vec<f64>,
}

impl CostParams {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0 && self.alpha3 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cost weights must be nonnegative (got {}, {}, {})",
                self.alpha1, self.alpha2, self.alpha3
            )));
        }
        if self.target.len() != dim {
            return Err(Error::InvalidParameter(format!(
                "target has {} coordinates, model dimension is {dim}",
                self.target.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_evaders: usize,
    pub n_drivers: usize,
    pub dim: usize,
    pub kernel: KernelParams,
    pub cost: CostParams,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_evaders == 0 || self.n_drivers == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "need n_evaders >= 1, n_drivers >= 1, dim >= 1 (got {}, {}, {})",
                self.n_evaders, self.n_drivers, self.dim
            )));
        }
        self.kernel.validate()?;
        self.cost.validate(self.dim)
    }
}

/// Uniform time grid `t_n = n dt`, `n = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dt: f64,
    pub n_steps: usize,
}

impl Grid {
    /// Grid with `floor(horizon / dt)` steps. A relative slack of 1e-9 absorbs
    /// representation error so that e.g. `3.0 / 0.01` gives 300 steps.
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid needs dt > 0 and horizon >= 0 (got dt = {dt}, horizon = {horizon})"
            )));
        }
        let n_steps = (horizon / dt * (1.0 + 1e-9)).floor() as usize;
        Ok(Self { dt, n_steps })
    }

    pub fn with_steps(dt: f64, n_steps: usize) -> Self {
        Self { dt, n_steps }
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Number of steps covering `span`, or an error if `span` is not a multiple of `dt`.
    pub fn steps_for(&self, span: f64, what: &str) -> Result<usize> {
        let ratio = span / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-6 * ratio.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "{what} = {span} is not a positive integer multiple of dt = {}",
                self.dt
            )));
        }
        Ok(steps as usize)
    }
}

/// Positions and velocities of the evaders plus driver positions, flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub dim: usize,
    /// `N x d` evader positions.
    pub x: Vec<f64>,
    /// `N x d` evader velocities.
    pub v: Vec<f64>,
    /// `M x d` driver positions.
    pub y: Vec<f64>,
}

impl State {
    pub fn new(dim: usize, x: Vec<f64>, v: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 || x.len() % dim != 0 || y.len() % dim != 0 || x.len() != v.len() {
            return Err(Error::InvalidParameter(format!(
                "state arrays inconsistent with dim {dim}: |x| = {}, |v| = {}, |y| = {}",
                x.len(),
                v.len(),
                y.len()
            )));
        }
        let s = Self { dim, x, v, y };
        if !s.is_finite() {
            return Err(Error::InvalidParameter("state has non-finite entries".into()));
        }
        Ok(s)
    }

    pub fn n_evaders(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn n_drivers(&self) -> usize {
        self.y.len() / self.dim
    }

    pub fn evader(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn velocity(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn driver(&self, j: usize) -> &[f64] {
        &self.y[j * self.dim..(j + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).chain(&self.y).all(|c| c.is_finite())
    }

    pub(crate) fn check_model(&self, mp: &ModelParams) -> Result<()> {
        if self.dim != mp.dim || self.n_evaders() != mp.n_evaders || self.n_drivers() != mp.n_drivers {
            return Err(Error::InvalidParameter(format!(
                "state shape (N = {}, M = {}, d = {}) does not match model (N = {}, M = {}, d = {})",
                self.n_evaders(),
                self.n_drivers(),
                self.dim,
                mp.n_evaders,
                mp.n_drivers,
                mp.dim
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant driver velocities; step `n` holds on `[t_n, t_{n+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub n_drivers: usize,
    pub dim: usize,
    /// `n_steps x M x d`, row-major.
    pub values: Vec<f64>,
}

impl ControlSchedule {
    pub fn zeros(n_steps: usize, n_drivers: usize, dim: usize) -> Self {
        Self {
            n_drivers,
            dim,
            values: vec![0.0; n_steps * n_drivers * dim],
        }
    }

    /// The same driver velocities (`M x d`, flattened) at every step.
    pub fn constant(n_steps: usize, per_driver: &[f64], n_drivers: usize, dim: usize) -> Result<Self> {
        if per_driver.len() != n_drivers * dim {
            return Err(Error::InvalidParameter(format!(
                "constant control needs {} values, got {}",
                n_drivers * dim,
                per_driver.len()
            )));
        }
        let mut values = Vec::with_capacity(n_steps * per_driver.len());
        for _ in 0..n_steps {
            values.extend_from_slice(per_driver);
        }
        Ok(Self { n_drivers, dim, values })
    }

    pub fn stride(&self) -> usize {
        self.n_drivers * self.dim
    }

    pub fn n_steps(&self) -> usize {
        if self.stride() == 0 {
            0
        } else {
            self.values.len() / self.stride()
        }
    }

    /// Control slice (`M x d`) held during step `n`.
    pub fn at(&self, n: usize) -> &[f64] {
        let s = self.stride();
        &self.values[n * s..(n + 1) * s]
    }

    pub fn at_mut(&mut self, n: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.values[n * s..(n + 1) * s]
    }

    /// Steps `start..end` as a new schedule.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let s = self.stride();
        Self {
            n_drivers: self.n_drivers,
            dim: self.dim,
            values: self.values[start * s..end * s].to_vec(),
        }
    }

    /// Drop the first `shift` steps and zero-fill so the length is unchanged.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.n_steps();
        let mut out = Self::zeros(n, self.n_drivers, self.dim);
        if shift < n {
            let s = self.stride();
            out.values[..(n - shift) * s].copy_from_slice(&self.values[shift * s..]);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn check(&self, grid: &Grid, mp: &ModelParams) -> Result<()> {
        if self.n_drivers != mp.n_drivers || self.dim != mp.dim {
            return Err(Error::ScheduleMismatch(format!(
                "control has M = {}, d = {}; model has M = {}, d = {}",
                self.n_drivers, self.dim, mp.n_drivers, mp.dim
            )));
        }
        if self.n_steps() != grid.n_steps {
            return Err(Error::ScheduleMismatch(format!(
                "control covers {} steps, grid has {}",
                self.n_steps(),
                grid.n_steps
            )));
        }
        if !self.is_finite() {
            return Err(Error::InvalidParameter("control has non-finite entries".into()));
        }
        Ok(())
    }
}

/// One step's disjoint batches of evader indices. Each batch is sorted.
pub type Partition = Vec<Vec<usize>>;

/// Random partitions of the evaders for every time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub batch_size: usize,
    pub n_evaders: usize,
    pub seed: u64,
    pub partitions: Vec<Partition>,
}

impl BatchSchedule {
    pub fn n_steps(&self) -> usize {
        self.partitions.len()
    }
}

/// Draw an independent uniform partition into batches of size `batch_size` for each of
/// `n_steps` steps. The last batch of a step is shorter when `batch_size` does not divide
/// `n_evaders`.
pub fn sample_batch_schedule(seed: u64, n_evaders: usize, batch_size: usize, n_steps: usize) -> Result<BatchSchedule> {
    if batch_size < 2 || batch_size > n_evaders {
        return Err(Error::InvalidParameter(format!(
            "batch size must satisfy 2 <= P <= N (got P = {batch_size}, N = {n_evaders})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n_evaders).collect();
    let partitions = (0..n_steps)
        .map(|_| {
            perm.shuffle(&mut rng);
            perm.chunks(batch_size)
                .map(|c| {
                    let mut b = c.to_vec();
                    b.sort_unstable();
                    b
                })
                .collect()
        })
        .collect();
    Ok(BatchSchedule {
        batch_size,
        n_evaders,
        seed,
        partitions,
    })
}

/// `A_ij = 1` iff `i != j` and both lie in the same batch.
pub fn adjacency(partition: &[Vec<usize>], n_evaders: usize) -> Vec<Vec<u8>> {
    let mut a = vec![vec![0u8; n_evaders]; n_evaders];
    for batch in partition {
        for &i in batch {
            for &j in batch {
                if i != j {
                    a[i][j] = 1;
                }
            }
        }
    }
    a
}

/// Interactions evaluated per time step: `N d (1 + M d + P (d + 1))`, with `P = N`
/// for the full system.
pub fn interaction_count(n_evaders: usize, n_drivers: usize, dim: usize, batch_or_full: usize) -> u64 {
    let (n, m, d, p) = (n_evaders as u64, n_drivers as u64, dim as u64, batch_or_full as u64);
    n * d * (1 + m * d + p * (d + 1))
}

/// Which right-hand side drives the evolution.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Full,
    Rbm(&'a BatchSchedule),
}

impl Mode<'_> {
    pub(crate) fn check(&self, n_steps: usize, n_evaders: usize) -> Result<()> {
        if let Mode::Rbm(bs) = self {
            if bs.n_steps() < n_steps {
                return Err(Error::ScheduleMismatch(format!(
                    "batch schedule covers {} steps, need {n_steps}",
                    bs.n_steps()
                )));
            }
            if bs.n_evaders != n_evaders {
                return Err(Error::ScheduleMismatch(format!(
                    "batch schedule is for N = {}, model has N = {n_evaders}",
                    bs.n_evaders
                )));
            }
        }
        Ok(())
    }
}

/// Time derivative of a [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub dy: Vec<f64>,
}

/// Add the evader-evader terms of one batch to `dv`.
fn accumulate_batch(members: &[usize], s: &State, kp: &KernelParams, r: &mut [f64], dv: &mut [f64]) -> Result<()> {
    let len = members.len();
    if len < 2 {
        return Ok(());
    }
    let d = s.dim;
    let c = 1.0 / (len - 1) as f64;
    let a = kp.a_const;
    for (pos, &i) in members.iter().enumerate() {
        for &k in &members[pos + 1..] {
            for e in 0..d {
                r[e] = s.x[k * d + e] - s.x[i * d + e];
            }
            let (_, g) = g_term(r, kp, i, k)?;
            for e in 0..d {
                let pull = c * (a * (s.v[k * d + e] - s.v[i * d + e]) + g.value * r[e]);
                dv[i * d + e] += pull;
                dv[k * d + e] -= pull;
            }
        }
    }
    Ok(())
}

/// Add the driver repulsion to `dv`.
fn accumulate_drivers(s: &State, kp: &KernelParams, r: &mut [f64], dv: &mut [f64]) {
    let d = s.dim;
    let inv_m = 1.0 / s.n_drivers() as f64;
    for i in 0..s.n_evaders() {
        for j in 0..s.n_drivers() {
            for e in 0..d {
                r[e] = s.y[j * d + e] - s.x[i * d + e];
            }
            let f = RadialTerm::f(norm_sq(r), kp);
            for e in 0..d {
                dv[i * d + e] -= inv_m * f.value * r[e];
            }
        }
    }
}

/// Evader acceleration under `batches` (one batch of everyone for the full system).
pub(crate) fn acceleration<'b, I>(s: &State, kp: &KernelParams, batches: I, dv: &mut [f64]) -> Result<()>
where
    I: IntoIterator<Item = &'b [usize]>,
{
    dv.iter_mut().for_each(|c| *c = 0.0);
    let mut r = vec![0.0; s.dim];
    for b in batches {
        accumulate_batch(b, s, kp, &mut r, dv)?;
    }
    accumulate_drivers(s, kp, &mut r, dv);
    Ok(())
}

fn derivative(s: &State, u_now: &[f64], dv: Vec<f64>) -> Derivative {
    Derivative {
        dx: s.v.clone(),
        dv,
        dy: u_now.to_vec(),
    }
}

/// Right-hand side of the all-to-all system.
pub fn full_rhs(s: &State, u_now: &[f64], mp: &ModelParams) -> Result<Derivative> {
    s.check_model(mp)?;
    let all: Vec<usize> = (0..mp.n_evaders).collect();
    let mut dv = vec![0.0; s.x.len()];
    acceleration(s, &mp.kernel, std::iter::once(all.as_slice()), &mut dv)?;
    Ok(derivative(s, u_now, dv))
}

/// Right-hand side of the batch-reduced system for one step's partition.
pub fn rbm_rhs(s: &State, u_now: &[f64], partition: &[Vec<usize>], mp: &ModelParams) -> Result<Derivative> {
    s.check_model(mp)?;
    let mut dv = vec![0.0; s.x.len()];
    acceleration(s, &mp.kernel, partition.iter().map(Vec::as_slice), &mut dv)?;
    Ok(derivative(s, u_now, dv))
}

/// States on the grid, `states[n]` at `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Write `t,kind,index,coord0..` rows for every `stride`-th step and the final step.
    pub fn write_csv<W: Write>(&self, stride: usize, mut w: W) -> Result<()> {
        let stride = stride.max(1);
        let d = self.states[0].dim;
        write!(w, "t,kind,index")?;
        for e in 0..d {
            write!(w, ",coord{e}")?;
        }
        writeln!(w)?;
        let last = self.states.len() - 1;
        for (n, s) in self.states.iter().enumerate() {
            if n % stride != 0 && n != last {
                continue;
            }
            let t = format_time(self.grid.time(n));
            for (kind, arr) in [("x", &s.x), ("v", &s.v), ("y", &s.y)] {
                for (idx, row) in arr.chunks(d).enumerate() {
                    write!(w, "{t},{kind},{idx}")?;
                    for c in row {
                        write!(w, ",{c}")?;
                    }
                    writeln!(w)?;
                }
            }
        }
        Ok(())
    }
}

/// Grid times rounded to 1e-12 so `7 * 0.01` prints as `0.07`.
pub(crate) fn format_time(t: f64) -> String {
    format!("{}", (t * 1e12).round() / 1e12)
}

/// Explicit Euler step `s + dt * rhs` into `next`.
pub(crate) fn euler_update(s: &State, dv: &[f64], u_now: &[f64], dt: f64, next: &mut State) {
    for ((nx, x), v) in next.x.iter_mut().zip(&s.x).zip(&s.v) {
        *nx = x + dt * v;
    }
    for ((nv, v), a) in next.v.iter_mut().zip(&s.v).zip(dv) {
        *nv = v + dt * a;
    }
    for ((ny, y), u) in next.y.iter_mut().zip(&s.y).zip(u_now) {
        *ny = y + dt * u;
    }
}

/// Integrate with explicit Euler under the full or batch-reduced dynamics.
pub fn integrate_forward(s0: &State, u: &ControlSchedule, grid: &Grid, mp: &ModelParams, mode: Mode<'_>) -> Result<Trajectory> {
    s0.check_model(mp)?;
    u.check(grid, mp)?;
    mode.check(grid.n_steps, mp.n_evaders)?;
    let all: Vec<usize> = (0..mp.n_evaders).collect();
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(s0.clone());
    let mut dv = vec![0.0; s0.x.len()];
    for n in 0..grid.n_steps {
        let s = &states[n];
        let res = match mode {
            Mode::Full => acceleration(s, &mp.kernel, std::iter::once(all.as_slice()), &mut dv),
            Mode::Rbm(bs) => acceleration(s, &mp.kernel, bs.partitions[n].iter().map(Vec::as_slice), &mut dv),
        };
        res.map_err(|e| Error::Integration {
            step: n,
            source: Box::new(e),
        })?;
        let mut next = s.clone();
        euler_update(s, &dv, u.at(n), grid.dt, &mut next);
        states.push(next);
    }
    Ok(Trajectory { grid: *grid, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn model(n: usize, m: usize) -> ModelParams {
        ModelParams {
            n_evaders: n,
            n_drivers: m,
            dim: 2,
            kernel: KernelParams::reference(n),
            cost: CostParams {
                alpha1: 1.0,
                alpha2: 1e-4,
                alpha3: 1e-4,
                target: vec![0.5, 0.5],
            },
        }
    }

    /// Direct transcription of the all-to-all acceleration over ordered pairs.
    fn naive_dv(s: &State, mp: &ModelParams) -> Vec<f64> {
        let d = s.dim;
        let n = s.n_evaders();
        let m = s.n_drivers();
        let kp = &mp.kernel;
        let mut dv = vec![0.0; n * d];
        for i in 0..n {
            for k in 0..n {
                if k == i {
                    continue;
                }
                let r: Vec<f64> = (0..d).map(|e| s.x[k * d + e] - s.x[i * d + e]).collect();
                let g = crate::kernels::eval_g(&r, kp);
                let a = crate::kernels::eval_a(&r, kp);
                for e in 0..d {
                    dv[i * d + e] += (a * (s.v[k * d + e] - s.v[i * d + e]) + g * r[e]) / (n - 1) as f64;
                }
            }
            for j in 0..m {
                let r: Vec<f64> = (0..d).map(|e| s.y[j * d + e] - s.x[i * d + e]).collect();
                let f = crate::kernels::eval_f(&r, kp);
                for e in 0..d {
                    dv[i * d + e] -= f * r[e] / m as f64;
                }
            }
        }
        dv
    }

    #[test]
    fn far_drivers_exert_nothing() {
        let mp = model(2, 1);
        let s = State::new(2, vec![0.0, 0.0, 1.0, 0.0], vec![0.0; 4], vec![10.0, 10.0]).unwrap();
        let d = full_rhs(&s, &[0.0, 0.0], &mp).unwrap();
        let expected = 2.0 * (1.0 - 1.0 / (3.0 * 2f64.sqrt()));
        assert!((d.dv[0] - expected).abs() < 1e-14);
        assert!((expected - 1.5286).abs() < 1e-4);
        assert_eq!(d.dv[1], 0.0);
        assert!((d.dv[2] + expected).abs() < 1e-14);
    }

    #[test]
    fn coincident_pair_with_far_drivers() {
        // both evaders at the origin: f((10,10)) underflows and g hits the collision guard
        let mp = model(2, 1);
        let s = State::new(2, vec![0.0; 4], vec![0.0; 4], vec![10.0, 10.0]).unwrap();
        assert!(matches!(full_rhs(&s, &[0.0, 0.0], &mp), Err(Error::Degenerate { i: 0, k: 1 })));
        let single = model(1, 1);
        let s = State::new(2, vec![0.0, 0.0], vec![0.0; 2], vec![10.0, 10.0]).unwrap();
        let d = full_rhs(&s, &[0.0, 0.0], &single).unwrap();
        assert_eq!(d.dv, vec![0.0, 0.0]);
    }

    #[test]
    fn equal_velocities_do_not_align() {
        let mut mp = model(3, 1);
        mp.kernel.g_scale = 0.0;
        let s = State::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0], vec![0.3, -0.2, 0.3, -0.2, 0.3, -0.2], vec![50.0, 50.0]).unwrap();
        let d = full_rhs(&s, &[0.0, 0.0], &mp).unwrap();
        assert!(d.dv.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn full_rhs_matches_naive_formula() {
        let mp = model(6, 2);
        let s = scenario::random_state(&mp, 0.5, 3);
        let d = full_rhs(&s, &[0.1, 0.2, 0.3, 0.4], &mp).unwrap();
        for (a, b) in d.dv.iter().zip(naive_dv(&s, &mp)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(d.dx, s.v);
        assert_eq!(d.dy, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn single_batch_equals_full() {
        let mp = model(5, 1);
        let s = scenario::random_state(&mp, 0.5, 9);
        let full = full_rhs(&s, &[0.0, 0.0], &mp).unwrap();
        let rbm = rbm_rhs(&s, &[0.0, 0.0], &[vec![0, 1, 2, 3, 4]], &mp).unwrap();
        assert_eq!(full, rbm);
    }

    #[test]
    fn batch_locality() {
        let mp = model(4, 1);
        let s = scenario::random_state(&mp, 0.5, 1);
        let part = vec![vec![0, 1], vec![2, 3]];
        let base = rbm_rhs(&s, &[0.0, 0.0], &part, &mp).unwrap();
        let mut moved = s.clone();
        moved.x[4] += 0.3;
        moved.v[6] -= 0.7;
        let after = rbm_rhs(&moved, &[0.0, 0.0], &part, &mp).unwrap();
        assert_eq!(&base.dv[0..4], &after.dv[0..4]);
    }

    #[test]
    fn singleton_batch_feels_only_drivers() {
        let mp = model(3, 1);
        let s = scenario::random_state(&mp, 0.3, 2);
        let d = rbm_rhs(&s, &[0.0, 0.0], &[vec![0, 1], vec![2]], &mp).unwrap();
        let r: Vec<f64> = (0..2).map(|e| s.y[e] - s.x[4 + e]).collect();
        let f = crate::kernels::eval_f(&r, &mp.kernel);
        assert!((d.dv[4] + f * r[0]).abs() < 1e-15);
        assert!((d.dv[5] + f * r[1]).abs() < 1e-15);
    }

    #[test]
    fn schedule_shapes() {
        let bs = sample_batch_schedule(11, 4, 4, 5).unwrap();
        for p in &bs.partitions {
            assert_eq!(p, &vec![vec![0, 1, 2, 3]]);
        }
        let bs = sample_batch_schedule(3, 36, 2, 10).unwrap();
        for p in &bs.partitions {
            assert_eq!(p.len(), 18);
            let mut all: Vec<usize> = p.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..36).collect::<Vec<_>>());
            for row in adjacency(p, 36) {
                assert_eq!(row.iter().map(|&c| c as usize).sum::<usize>(), 1);
            }
        }
        assert_eq!(bs, sample_batch_schedule(3, 36, 2, 10).unwrap());
        assert_ne!(bs, sample_batch_schedule(4, 36, 2, 10).unwrap());
        let rem = sample_batch_schedule(5, 7, 3, 3).unwrap();
        for p in &rem.partitions {
            let mut sizes: Vec<usize> = p.iter().map(Vec::len).collect();
            sizes.sort_unstable();
            assert_eq!(sizes, vec![1, 3, 3]);
        }
    }

    #[test]
    fn schedule_rejects_bad_batch_size() {
        assert!(sample_batch_schedule(0, 5, 1, 3).is_err());
        assert!(sample_batch_schedule(0, 5, 6, 3).is_err());
    }

    #[test]
    fn adjacency_examples() {
        let a = adjacency(&[vec![0, 1], vec![2, 3]], 4);
        let ones: Vec<(usize, usize)> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| a[i][j] == 1)
            .collect();
        assert_eq!(ones, vec![(0, 1), (1, 0), (2, 3), (3, 2)]);
        let a = adjacency(&[vec![0, 1, 2]], 3);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], u8::from(i != j));
            }
        }
    }

    #[test]
    fn pair_frequency_matches_bernoulli_rate() {
        let steps = 10_000;
        let bs = sample_batch_schedule(2024, 36, 2, steps).unwrap();
        let hits = bs
            .partitions
            .iter()
            .filter(|p| p.iter().any(|b| b.contains(&3) && b.contains(&17)))
            .count();
        let p = 1.0 / 35.0;
        let se = (p * (1.0 - p) / steps as f64).sqrt();
        let freq = hits as f64 / steps as f64;
        assert!((freq - p).abs() < 4.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn interaction_counts() {
        assert_eq!(interaction_count(36, 2, 2, 36), 8136);
        assert_eq!(interaction_count(36, 2, 2, 2), 792);
        assert_eq!(interaction_count(36, 2, 2, 18), 4248);
        let mut prev = 0;
        for p in 2..=36 {
            let c = interaction_count(36, 2, 2, p);
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn rest_state_is_stationary() {
        let mp = model(1, 1);
        let s = State::new(2, vec![0.1, 0.2], vec![0.0, 0.0], vec![100.0, 100.0]).unwrap();
        let grid = Grid::new(0.01, 1.0).unwrap();
        let u = ControlSchedule::zeros(grid.n_steps, 1, 2);
        let traj = integrate_forward(&s, &u, &grid, &mp, Mode::Full).unwrap();
        assert_eq!(traj.states.len(), 101);
        assert!(traj.states.iter().all(|t| t == &s));
    }

    #[test]
    fn rbm_with_one_batch_is_bitwise_full() {
        let mp = model(6, 1);
        let s = scenario::random_state(&mp, 0.2, 3);
        let grid = Grid::new(0.01, 1.0).unwrap();
        let u = ControlSchedule::constant(grid.n_steps, &[0.2, 0.02], 1, 2).unwrap();
        let bs = sample_batch_schedule(1, 6, 6, grid.n_steps).unwrap();
        let full = integrate_forward(&s, &u, &grid, &mp, Mode::Full).unwrap();
        let rbm = integrate_forward(&s, &u, &grid, &mp, Mode::Rbm(&bs)).unwrap();
        assert_eq!(full, rbm);
    }

    #[test]
    fn integration_reports_failing_step() {
        let mp = model(2, 1);
        // evaders approach head-on and meet exactly at the midpoint after one step
        let s = State::new(2, vec![0.0, 0.0, 0.02, 0.0], vec![1.0, 0.0, -1.0, 0.0], vec![100.0, 100.0]).unwrap();
        let mut mp2 = mp.clone();
        mp2.kernel.g_scale = 0.0;
        mp2.kernel.a_const = 0.0;
        let grid = Grid::with_steps(0.01, 3);
        let u = ControlSchedule::zeros(3, 1, 2);
        match integrate_forward(&s, &u, &grid, &mp2, Mode::Full) {
            Err(Error::Integration { step, source }) => {
                assert_eq!(step, 1);
                assert!(matches!(*source, Error::Degenerate { .. }));
            }
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let mp = model(2, 1);
        let s = scenario::random_state(&mp, 0.3, 1);
        let grid = Grid::with_steps(0.01, 5);
        let u = ControlSchedule::zeros(4, 1, 2);
        assert!(matches!(integrate_forward(&s, &u, &grid, &mp, Mode::Full), Err(Error::ScheduleMismatch(_))));
        let u = ControlSchedule::zeros(5, 1, 2);
        let bs = sample_batch_schedule(0, 2, 2, 3).unwrap();
        assert!(matches!(integrate_forward(&s, &u, &grid, &mp, Mode::Rbm(&bs)), Err(Error::ScheduleMismatch(_))));
    }

    #[test]
    fn grid_arithmetic() {
        assert_eq!(Grid::new(0.01, 10.0).unwrap().n_steps, 1000);
        assert_eq!(Grid::new(0.01, 3.0).unwrap().n_steps, 300);
        assert_eq!(Grid::new(0.01, 4.0).unwrap().n_steps, 400);
        assert_eq!(Grid::new(0.01, 0.0).unwrap().n_steps, 0);
        assert!(Grid::new(0.0, 1.0).is_err());
        let g = Grid::new(0.01, 4.0).unwrap();
        assert_eq!(g.steps_for(1.5, "tau").unwrap(), 150);
        assert!(g.steps_for(0.015, "tau").is_err());
    }

    #[test]
    fn csv_layout() {
        let mp = model(2, 1);
        let s = scenario::random_state(&mp, 0.3, 1);
        let grid = Grid::with_steps(0.01, 3);
        let u = ControlSchedule::zeros(3, 1, 2);
        let traj = integrate_forward(&s, &u, &grid, &mp, Mode::Full).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(2, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,kind,index,coord0,coord1");
        // steps 0, 2 and the final step 3; 5 particle rows each
        assert_eq!(lines.len(), 1 + 3 * 5);
        assert!(lines[1].starts_with("0,x,0,"));
        assert!(lines[6].starts_with("0.02,x,0,"));
        assert!(lines[11].starts_with("0.03,x,0,"));
        assert!(lines[15].starts_with("0.03,y,0,"));
    }
}
