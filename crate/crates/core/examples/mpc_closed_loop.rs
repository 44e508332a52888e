//! Receding-horizon guidance: re-plan every 1.5 time units over a 3-unit horizon
//! until t = 4, with the full model or random batches as predictor.

use rbm_mpc::{run_mpc, scenario, GdConfig, MpcConfig, PlantKind, Predictor, Result};

fn main() -> Result<()> {
    let mp = scenario::reference_model();
    let grid = scenario::reference_grid(4.0);
    let s0 = scenario::reference_state();
    let guess = scenario::reference_control(300);

    for predictor in [Predictor::Full, Predictor::Rbm { batch_size: 2, seed: 1 }] {
        let cfg = MpcConfig {
            tau: 1.5,
            t_hat: 3.0,
            total_horizon: 4.0,
            predictor,
            gd: GdConfig::default(),
        };
        let res = run_mpc(&s0, &guess, &mp, &grid, &cfg, PlantKind::Deterministic)?;
        println!("{predictor:?}");
        for w in &res.window_reports {
            println!(
                "  window {} predicts [{}, {}], applies [{}, {}]: {} GD iterations, {:.2} s",
                w.window, w.t_start, w.t_predict_end, w.t_start, w.t_apply_end, w.gd_iters, w.wall_time
            );
        }
        println!("  realised cost J = {:.4}", res.realized_cost.total);
    }
    Ok(())
}
