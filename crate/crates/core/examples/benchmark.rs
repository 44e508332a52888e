//! Forward integration timings for the full model and each batch size.
//!
//! cargo run --release --example benchmark

use std::path::Path;

use rbm_mpc::harness::{benchmark, ExperimentConfig};
use rbm_mpc::Result;

fn main() -> Result<()> {
    let resolved = ExperimentConfig::reference(10.0).resolve(Path::new("."))?;
    let report = benchmark(&resolved, &[2, 4, 6, 9, 18], 20, 3)?;
    println!("{:>6} {:>10} {:>8} {:>8} {:>8}", "mode", "mean ms", "ratio", "count", "ratio");
    for r in &report.rows {
        println!(
            "{:>6} {:>10.3} {:>8.3} {:>8} {:>8.3}",
            r.label, r.mean_ms, r.time_ratio, r.interactions, r.count_ratio
        );
    }
    Ok(())
}
