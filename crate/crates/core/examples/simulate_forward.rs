//! Integrate the reference herd under the constant north-east control, once with the
//! full dynamics and once with random batches of two.
//!
//! cargo run --release --example simulate_forward [horizon] [out.csv]

use rbm_mpc::dynamics::{integrate_forward, sample_batch_schedule, Mode, State};
use rbm_mpc::{scenario, total_cost, Result};

fn centroid(s: &State) -> (f64, f64) {
    let n = s.n_evaders() as f64;
    let (sx, sy) = s.x.chunks(2).fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    (sx / n, sy / n)
}

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let horizon: f64 = args.next().map_or(10.0, |s| s.parse().expect("horizon"));
    let out = args.next();

    let mp = scenario::reference_model();
    let grid = scenario::reference_grid(horizon);
    let s0 = scenario::reference_state();
    let u = scenario::reference_control(grid.n_steps);

    let full = integrate_forward(&s0, &u, &grid, &mp, Mode::Full)?;
    let batches = sample_batch_schedule(42, mp.n_evaders, 2, grid.n_steps)?;
    let rbm = integrate_forward(&s0, &u, &grid, &mp, Mode::Rbm(&batches))?;

    for (name, traj) in [("full", &full), ("rbm P=2", &rbm)] {
        let (cx, cy) = centroid(traj.last());
        let j = total_cost(traj, &u, &mp.cost);
        println!("{name:>8}: centroid at t={horizon} = ({cx:.4}, {cy:.4}), cost J = {:.4}", j.total);
    }

    if let Some(path) = out {
        full.write_csv(10, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
