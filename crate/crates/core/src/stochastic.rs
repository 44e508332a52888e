//! Noisy plant: multiplicative noise on the evader velocities.
//!
//! Each evader owns one scalar Brownian path `B^i`, and its velocity follows
//! `dv_i = F_i dt + sigma v_i dB^i`. The Milstein update for this diagonal noise is
//!
//! ```text
//! v_i' = v_i + F_i dt + sigma v_i dB_i + sigma^2 / 2 * v_i (dB_i^2 - dt)
//! ```
//!
//! applied with the same scalar `dB_i` on every coordinate of `v_i`. Positions and
//! drivers advance with explicit Euler as in the deterministic system.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{acceleration, euler_update, rng_from_seed, ControlSchedule, Grid, ModelParams, State, Trajectory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeParams {
    pub sigma: f64,
    pub seed: u64,
}

impl SdeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Brownian increments `dB` for every step and evader, `n_steps x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    pub n_evaders: usize,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl BrownianIncrements {
    /// Independent `Normal(0, dt)` draws, a deterministic function of `seed`.
    pub fn sample(seed: u64, n_steps: usize, n_evaders: usize, dt: f64) -> Self {
        let mut rng = rng_from_seed(seed);
        let normal = Normal::new(0.0, dt.sqrt()).expect("dt > 0");
        let values = (0..n_steps * n_evaders).map(|_| normal.sample(&mut rng)).collect();
        Self { n_evaders, dt, values }
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() / self.n_evaders.max(1)
    }

    pub fn at(&self, n: usize) -> &[f64] {
        &self.values[n * self.n_evaders..(n + 1) * self.n_evaders]
    }

    /// Sum blocks of `factor` consecutive steps: the same path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Self {
        let n = self.n_evaders;
        let coarse_steps = self.n_steps() / factor;
        let mut values = vec![0.0; coarse_steps * n];
        for c in 0..coarse_steps {
            for f in 0..factor {
                for (acc, db) in values[c * n..(c + 1) * n].iter_mut().zip(self.at(c * factor + f)) {
                    *acc += db;
                }
            }
        }
        Self {
            n_evaders: n,
            dt: self.dt * factor as f64,
            values,
        }
    }
}

/// Milstein integration of the full noisy system with increments drawn from `sp.seed`.
pub fn integrate_sde(s0: &State, u: &ControlSchedule, grid: &Grid, mp: &ModelParams, sp: &SdeParams) -> Result<Trajectory> {
    sp.validate()?;
    let incs = BrownianIncrements::sample(sp.seed, grid.n_steps, mp.n_evaders, grid.dt);
    integrate_sde_with(s0, u, grid, mp, sp.sigma, &incs, 0)
}

/// Milstein integration driven by `incs`, starting at increment row `offset`.
///
/// The offset lets a long noise path be consumed one segment at a time, as the
/// closed loop does when it advances the plant window by window.
pub fn integrate_sde_with(
    s0: &State,
    u: &ControlSchedule,
    grid: &Grid,
    mp: &ModelParams,
    sigma: f64,
    incs: &BrownianIncrements,
    offset: usize,
) -> Result<Trajectory> {
    s0.check_model(mp)?;
    u.check(grid, mp)?;
    if incs.n_evaders != mp.n_evaders || incs.n_steps() < offset + grid.n_steps {
        return Err(Error::ScheduleMismatch(format!(
            "noise path has {} steps for N = {}, need {} steps from offset {offset} for N = {}",
            incs.n_steps(),
            incs.n_evaders,
            grid.n_steps,
            mp.n_evaders
        )));
    }
    if (incs.dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(Error::ScheduleMismatch(format!(
            "noise path step {} differs from grid step {}",
            incs.dt, grid.dt
        )));
    }
    let d = mp.dim;
    let dt = grid.dt;
    let all: Vec<usize> = (0..mp.n_evaders).collect();
    let mut states = Vec::with_capacity(grid.n_steps + 1);
    states.push(s0.clone());
    let mut dv = vec![0.0; s0.x.len()];
    for n in 0..grid.n_steps {
        let s = &states[n];
        acceleration(s, &mp.kernel, std::iter::once(all.as_slice()), &mut dv).map_err(|e| Error::Integration {
            step: n,
            source: Box::new(e),
        })?;
        let mut next = s.clone();
        euler_update(s, &dv, u.at(n), dt, &mut next);
        if sigma != 0.0 {
            for (i, db) in incs.at(offset + n).iter().enumerate() {
                let gain = sigma * db + 0.5 * sigma * sigma * (db * db - dt);
                for e in 0..d {
                    next.v[i * d + e] += gain * s.v[i * d + e];
                }
            }
        }
        states.push(next);
    }
    Ok(Trajectory { grid: *grid, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_forward, Mode};
    use crate::scenario;

    /// Drift-free toy: no cohesion, no alignment, drivers far away.
    fn toy(n: usize) -> (ModelParams, State) {
        let mut mp = scenario::planar_model(n, 1);
        mp.kernel.g_scale = 0.0;
        mp.kernel.a_const = 0.0;
        let mut s = scenario::random_state(&mp, 1.0, 42);
        s.y = vec![1e3, 1e3];
        (mp, s)
    }

    #[test]
    fn zero_sigma_is_bitwise_deterministic() {
        let mp = scenario::reference_model();
        let s = scenario::reference_state();
        let grid = scenario::reference_grid(1.0);
        let u = scenario::reference_control(grid.n_steps);
        let det = integrate_forward(&s, &u, &grid, &mp, Mode::Full).unwrap();
        let sde = integrate_sde(&s, &u, &grid, &mp, &SdeParams { sigma: 0.0, seed: 9 }).unwrap();
        assert_eq!(det, sde);
    }

    #[test]
    fn seeds_determine_paths() {
        let (mp, s) = toy(3);
        let grid = Grid::with_steps(0.01, 50);
        let u = ControlSchedule::zeros(50, 1, 2);
        let sp = SdeParams { sigma: 0.5, seed: 3 };
        let a = integrate_sde(&s, &u, &grid, &mp, &sp).unwrap();
        assert_eq!(a, integrate_sde(&s, &u, &grid, &mp, &sp).unwrap());
        let b = integrate_sde(&s, &u, &grid, &mp, &SdeParams { sigma: 0.5, seed: 4 }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn one_scalar_increment_per_evader() {
        let (mp, s) = toy(4);
        let grid = Grid::with_steps(0.01, 1);
        let u = ControlSchedule::zeros(1, 1, 2);
        let sigma = 0.7;
        let traj = integrate_sde(&s, &u, &grid, &mp, &SdeParams { sigma, seed: 11 }).unwrap();
        let incs = BrownianIncrements::sample(11, 1, 4, 0.01);
        for i in 0..4 {
            let ratio0 = traj.states[1].v[2 * i] / s.v[2 * i];
            let ratio1 = traj.states[1].v[2 * i + 1] / s.v[2 * i + 1];
            assert!((ratio0 - ratio1).abs() < 1e-12);
            // invert the Milstein gain for dB and compare with the stored increment
            let db = incs.at(0)[i];
            let expected = 1.0 + sigma * db + 0.5 * sigma * sigma * (db * db - 0.01);
            assert!((ratio0 - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn coarsening_sums_blocks() {
        let fine = BrownianIncrements::sample(1, 8, 2, 0.25);
        let coarse = fine.coarsen(4);
        assert_eq!(coarse.n_steps(), 2);
        assert_eq!(coarse.dt, 1.0);
        let s: f64 = (0..4).map(|n| fine.at(n)[1]).sum();
        assert!((coarse.at(0)[1] - s).abs() < 1e-15);
    }

    #[test]
    fn mismatched_noise_is_rejected() {
        let (mp, s) = toy(2);
        let grid = Grid::with_steps(0.01, 10);
        let u = ControlSchedule::zeros(10, 1, 2);
        let incs = BrownianIncrements::sample(1, 5, 2, 0.01);
        assert!(integrate_sde_with(&s, &u, &grid, &mp, 0.5, &incs, 0).is_err());
        let incs = BrownianIncrements::sample(1, 10, 2, 0.02);
        assert!(integrate_sde_with(&s, &u, &grid, &mp, 0.5, &incs, 0).is_err());
    }
}
