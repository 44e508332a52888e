//! Open-loop optimal guidance with the adaptive gradient descent, optimising against
//! the full model and against random batches of two, and replaying both controls on
//! the full model.
//!
//! cargo run --release --example optimal_control [horizon]

use rbm_mpc::dynamics::{integrate_forward, sample_batch_schedule, Mode};
use rbm_mpc::{scenario, solve_ocp, total_cost, GdConfig, Result};

fn main() -> Result<()> {
    let horizon: f64 = std::env::args().nth(1).map_or(4.0, |s| s.parse().expect("horizon"));
    let mp = scenario::reference_model();
    let grid = scenario::reference_grid(horizon);
    let s0 = scenario::reference_state();
    let guess = scenario::reference_control(grid.n_steps);
    let gd = GdConfig::default();
    let batches = sample_batch_schedule(1, mp.n_evaders, 2, grid.n_steps)?;

    println!("{:<10} {:>8} {:>8} {:>9} {:>11} {:>9}", "model", "GD iter", "EV", "cost J", "J on full", "time s");
    for (name, mode) in [("full", Mode::Full), ("rbm P=2", Mode::Rbm(&batches))] {
        let res = solve_ocp(&s0, &guess, &grid, &mp, mode, &gd)?;
        let replay = integrate_forward(&s0, &res.u_opt, &grid, &mp, Mode::Full)?;
        let on_full = total_cost(&replay, &res.u_opt, &mp.cost).total;
        println!(
            "{name:<10} {:>8} {:>8} {:>9.4} {:>11.4} {:>9.2}",
            res.gd_iterations, res.ev_calculations, res.final_cost.total, on_full, res.wall_time
        );
    }
    Ok(())
}
