//! A noisy herd (multiplicative velocity noise, Milstein scheme) guided by the
//! deterministic open-loop optimum versus batch-reduced MPC re-planning every time unit.
//!
//! cargo run --release --example noisy_plant [seeds]

use rbm_mpc::harness::stats::median;
use rbm_mpc::{
    integrate_sde, run_mpc, scenario, solve_ocp, total_cost, GdConfig, Mode, MpcConfig, PlantKind, Predictor, Result, SdeParams,
};

fn main() -> Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(3, |s| s.parse().expect("seed count"));
    let mp = scenario::reference_model();
    let grid = scenario::reference_grid(4.0);
    let s0 = scenario::reference_state();
    let gd = GdConfig::default();

    let open_loop = solve_ocp(&s0, &scenario::reference_control(grid.n_steps), &grid, &mp, Mode::Full, &gd)?;
    println!("deterministic open-loop optimum J = {:.4}", open_loop.final_cost.total);

    let cfg = MpcConfig {
        tau: 1.0,
        t_hat: 3.0,
        total_horizon: 4.0,
        predictor: Predictor::Rbm { batch_size: 2, seed: 1 },
        gd,
    };
    let (mut ol, mut cl) = (Vec::new(), Vec::new());
    for seed in 0..seeds {
        let sp = SdeParams { sigma: 0.5, seed };
        let traj = integrate_sde(&s0, &open_loop.u_opt, &grid, &mp, &sp)?;
        ol.push(total_cost(&traj, &open_loop.u_opt, &mp.cost).total);
        let res = run_mpc(&s0, &scenario::reference_control(300), &mp, &grid, &cfg, PlantKind::Noisy(sp))?;
        cl.push(res.realized_cost.total);
        println!("seed {seed}: open loop {:.4}, MPC-RBM {:.4}", ol.last().unwrap(), cl.last().unwrap());
    }
    println!("median: open loop {:.4}, MPC-RBM {:.4}", median(&ol), median(&cl));
    Ok(())
}
