//! Initial layouts and the reference guiding configuration.
//!
//! The reference setup is a herd of 36 evaders at rest on a 6 x 6 lattice spanning
//! `[-0.2, 0.2]^2`, two drivers starting at `(-1, 0)` and `(0, -1)`, the target
//! `(0.5, 0.5)`, and cost weights `(1, 1e-4, 1e-4)`.

use rand::Rng;

use crate::dynamics::{rng_from_seed, ControlSchedule, CostParams, Grid, ModelParams, State};
use crate::error::{Error, Result};
use crate::kernels::KernelParams;

pub const REFERENCE_N: usize = 36;
pub const REFERENCE_HALF_WIDTH: f64 = 0.2;
pub const REFERENCE_DRIVERS: [f64; 4] = [-1.0, 0.0, 0.0, -1.0];
/// Constant driver velocities pushing the herd north-east.
pub const REFERENCE_CONTROL: [f64; 4] = [0.2, 0.02, 0.02, 0.2];
pub const REFERENCE_DT: f64 = 0.01;

pub fn reference_cost() -> CostParams {
    CostParams {
        alpha1: 1.0,
        alpha2: 1e-4,
        alpha3: 1e-4,
        target: vec![0.5, 0.5],
    }
}

/// Reference model for `n` evaders and `m` drivers in the plane.
pub fn planar_model(n: usize, m: usize) -> ModelParams {
    ModelParams {
        n_evaders: n,
        n_drivers: m,
        dim: 2,
        kernel: KernelParams::reference(n),
        cost: reference_cost(),
    }
}

pub fn reference_model() -> ModelParams {
    planar_model(REFERENCE_N, 2)
}

/// The reference initial state: lattice herd at rest plus the two drivers.
pub fn reference_state() -> State {
    lattice_state(&reference_model(), REFERENCE_HALF_WIDTH, &REFERENCE_DRIVERS).expect("36 is a square")
}

/// The constant reference control over `n_steps` steps.
pub fn reference_control(n_steps: usize) -> ControlSchedule {
    ControlSchedule::constant(n_steps, &REFERENCE_CONTROL, 2, 2).expect("two planar drivers")
}

pub fn reference_grid(horizon: f64) -> Grid {
    Grid::new(REFERENCE_DT, horizon).expect("positive horizon")
}

/// Side length `s` with `s^dim == n`, if any.
pub fn lattice_side(n: usize, dim: usize) -> Option<usize> {
    let guess = (n as f64).powf(1.0 / dim as f64).round() as usize;
    (guess.saturating_sub(1)..=guess + 1).find(|s| s.checked_pow(dim as u32) == Some(n))
}

/// `side^dim` points equally spaced on `[-half_width, half_width]^dim`, first
/// coordinate varying slowest.
pub fn lattice_positions(side: usize, dim: usize, half_width: f64) -> Vec<f64> {
    let coord = |i: usize| {
        if side == 1 {
            0.0
        } else {
            -half_width + 2.0 * half_width * i as f64 / (side - 1) as f64
        }
    };
    let total = side.pow(dim as u32);
    let mut out = Vec::with_capacity(total * dim);
    for idx in 0..total {
        let mut rem = idx;
        let mut point = vec![0.0; dim];
        for e in (0..dim).rev() {
            point[e] = coord(rem % side);
            rem /= side;
        }
        out.extend(point);
    }
    out
}

pub fn uniform_positions(n: usize, dim: usize, half_width: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n * dim).map(|_| rng.random_range(-half_width..=half_width)).collect()
}

/// Evaders at rest on a lattice, drivers at `drivers` (flattened `M x d`).
pub fn lattice_state(mp: &ModelParams, half_width: f64, drivers: &[f64]) -> Result<State> {
    let side = lattice_side(mp.n_evaders, mp.dim).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "lattice layout needs N to be a perfect power of dim, got N = {} and dim = {}",
            mp.n_evaders, mp.dim
        ))
    })?;
    State::new(
        mp.dim,
        lattice_positions(side, mp.dim, half_width),
        vec![0.0; mp.n_evaders * mp.dim],
        drivers.to_vec(),
    )
}

/// Evaders with uniformly random positions and velocities in `[-w, w]`, drivers at distance ~1.
pub fn random_state(mp: &ModelParams, w: f64, seed: u64) -> State {
    let mut rng = rng_from_seed(seed);
    let n = mp.n_evaders * mp.dim;
    let x = (0..n).map(|_| rng.random_range(-w..=w)).collect();
    let v = (0..n).map(|_| rng.random_range(-w..=w)).collect();
    let y = (0..mp.n_drivers * mp.dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
    State { dim: mp.dim, x, v, y }
}
