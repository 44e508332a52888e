//! Shared oracles for the integration tests.
#![allow(dead_code)]

use rbm_mpc::stochastic::{integrate_sde_with, BrownianIncrements};
use rbm_mpc::{scenario, ControlSchedule, Grid, ModelParams, State};

/// One evader with no interactions and a driver out of range, so `dv = sigma v dB`.
pub fn drift_free_toy(v0: [f64; 2]) -> (ModelParams, State) {
    let mut mp = scenario::planar_model(1, 1);
    mp.kernel.g_scale = 0.0;
    mp.kernel.a_const = 0.0;
    let s = State::new(2, vec![0.0, 0.0], v0.to_vec(), vec![1e3, 1e3]).unwrap();
    (mp, s)
}

/// Mean absolute error of the Milstein velocity at `t = 1` against the exact geometric
/// Brownian motion `v0 exp(sigma B - sigma^2 t / 2)`, for steps `2^-k` with `k` in `levels`.
pub fn milstein_strong_errors(sigma: f64, levels: &[u32], paths: u64) -> Vec<f64> {
    let (mp, s0) = drift_free_toy([1.0, -0.5]);
    let finest = 1usize << levels.iter().max().unwrap();
    let mut err = vec![0.0; levels.len()];
    for path in 0..paths {
        let fine = BrownianIncrements::sample(1000 + path, finest, 1, 1.0 / finest as f64);
        let b: f64 = fine.values.iter().sum();
        let exact = (sigma * b - 0.5 * sigma * sigma).exp();
        for (slot, &k) in err.iter_mut().zip(levels) {
            let steps = 1usize << k;
            let incs = fine.coarsen(finest / steps);
            let grid = Grid::with_steps(1.0 / steps as f64, steps);
            let u = ControlSchedule::zeros(steps, 1, 2);
            let traj = integrate_sde_with(&s0, &u, &grid, &mp, sigma, &incs, 0).unwrap();
            *slot += (traj.last().v[0] - exact).abs() / paths as f64;
        }
    }
    err
}
