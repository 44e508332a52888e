//! Random partitions of the herd and the interaction counts they save.

use rbm_mpc::dynamics::{adjacency, full_rhs, rbm_rhs};
use rbm_mpc::{interaction_count, sample_batch_schedule, scenario, Result};

fn main() -> Result<()> {
    let sched = sample_batch_schedule(7, 6, 2, 3)?;
    for (n, part) in sched.partitions.iter().enumerate() {
        println!("step {n}: {part:?}");
    }
    println!("adjacency at step 0:");
    for row in adjacency(&sched.partitions[0], 6) {
        println!("  {row:?}");
    }

    // the batch force is an unbiased estimate of the full one
    let mp = scenario::planar_model(6, 1);
    let s = scenario::random_state(&mp, 0.5, 3);
    let full = full_rhs(&s, &[0.0, 0.0], &mp)?;
    let draws = 20_000;
    let many = sample_batch_schedule(11, 6, 2, draws)?;
    let mut avg = vec![0.0; full.dv.len()];
    for part in &many.partitions {
        let d = rbm_rhs(&s, &[0.0, 0.0], part, &mp)?;
        avg.iter_mut().zip(&d.dv).for_each(|(a, b)| *a += b / draws as f64);
    }
    println!("evader 0 acceleration: full {:.5?}, batch average {:.5?}", &full.dv[..2], &avg[..2]);

    println!("\ninteractions per step, N=36, M=2, d=2");
    let base = interaction_count(36, 2, 2, 2) as f64;
    for p in [36, 2, 4, 6, 9, 18] {
        let c = interaction_count(36, 2, 2, p);
        let label = if p == 36 { "Full".to_string() } else { format!("P={p}") };
        println!("{label:>6} {c:>6} ({:.3})", c as f64 / base);
    }
    Ok(())
}
