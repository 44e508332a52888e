//! How far random-batch trajectories drift from the full one, over 200 replicas.

use std::path::Path;

use rbm_mpc::harness::{rbm_error_study, ErrorMetric, ExperimentConfig};
use rbm_mpc::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::reference(10.0);
    cfg.save_stride = 200;
    let resolved = cfg.resolve(Path::new("."))?;
    let report = rbm_error_study(&resolved, &[2, 4, 6], 200, 2024, ErrorMetric::Rms)?;
    println!("{:>3} {:>5} {:>24} {:>24}", "P", "t", "position (median [95%])", "velocity (median [95%])");
    for r in &report.rows {
        println!(
            "{:>3} {:>5} {:>9.5} [{:.4}, {:.4}] {:>9.5} [{:.4}, {:.4}]",
            r.batch_size, r.t, r.position.median, r.position.lo, r.position.hi, r.velocity.median, r.velocity.lo, r.velocity.hi
        );
    }
    Ok(())
}
