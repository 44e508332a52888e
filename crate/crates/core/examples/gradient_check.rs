//! Compare the adjoint gradient with central differences of the discrete cost.

use rbm_mpc::dynamics::{integrate_forward, sample_batch_schedule, Mode};
use rbm_mpc::{cost_and_gradient, scenario, total_cost, ControlSchedule, Grid, Result};

fn main() -> Result<()> {
    let mp = scenario::planar_model(4, 1);
    let s0 = scenario::random_state(&mp, 0.4, 17);
    let grid = Grid::with_steps(0.01, 10);
    let u = ControlSchedule::constant(10, &[0.3, -0.2], 1, 2)?;
    let batches = sample_batch_schedule(3, 4, 2, 10)?;

    for (name, mode) in [("full", Mode::Full), ("rbm", Mode::Rbm(&batches))] {
        let (_, grad) = cost_and_gradient(&s0, &u, &grid, &mp, mode)?;
        let h = 1e-3;
        let mut num = 0.0;
        let mut den = 0.0;
        for idx in 0..u.values.len() {
            let cost = |delta: f64| -> Result<f64> {
                let mut v = u.clone();
                v.values[idx] += delta;
                Ok(total_cost(&integrate_forward(&s0, &v, &grid, &mp, mode)?, &v, &mp.cost).total)
            };
            let fd = (cost(h)? - cost(-h)?) / (2.0 * h);
            num += (grad.values[idx] - fd).powi(2);
            den += fd * fd;
        }
        println!("{name:>4}: relative l2 error {:.2e}", (num / den).sqrt());
    }
    Ok(())
}
