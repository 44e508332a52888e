use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rbm_mpc::harness::experiments::closed_loop_summary;
use rbm_mpc::harness::io::{write_benchmark_csv, write_control_csv, write_error_study_csv, RunDir};
use rbm_mpc::harness::{self, ErrorMetric, ExperimentConfig, Resolved, RunMode};
use rbm_mpc::{Error, Result};

#[derive(Parser)]
#[command(name = "rbm-mpc", version, about = "Guidance-by-repulsion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory.
    Simulate(Common),
    /// Batch-reduced versus full trajectory errors over replicas.
    RbmErrorStudy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = MetricArg::Rms)]
        metric: MetricArg,
    },
    /// Forward integration timings.
    Benchmark {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
    },
    /// Open-loop optimal control.
    Optimize(Common),
    /// Closed-loop model predictive control.
    Mpc(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the batch seed, or the base seed of a study.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Batch sizes, comma separated. The first one is used where a single size is needed.
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Rbm,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Rms,
    MeanNorm,
}

struct Prepared {
    resolved: Resolved,
    run: RunDir,
    mode: RunMode,
    quiet: bool,
    p_list: Vec<usize>,
}

fn prepare(c: &Common) -> Result<Prepared> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(rep) = c.replicas {
        cfg.replicas = rep;
    }
    if let Some(seed) = c.seed {
        if let Some(rb) = cfg.rbm.as_mut() {
            rb.seed = seed;
        }
    }
    if let (Some(&p), Some(rb)) = (c.p.first(), cfg.rbm.as_mut()) {
        rb.batch_size = p;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    cfg.output_dir = Some(out.clone());
    let base = c.config.parent().unwrap_or(Path::new("."));
    let resolved = cfg.resolve(base)?;
    let mode = match c.mode {
        Some(ModeArg::Full) => RunMode::Full,
        Some(ModeArg::Rbm) => RunMode::Rbm,
        None if resolved.config.rbm.is_some() && resolved.config.sde.is_none() => RunMode::Rbm,
        None => RunMode::Full,
    };
    let run = RunDir::create(&out, &resolved.config)?;
    Ok(Prepared {
        resolved,
        run,
        mode,
        quiet: c.quiet,
        p_list: c.p.clone(),
    })
}

fn record(p: &Prepared, mut summary: serde_json::Value) -> Result<()> {
    summary["config"] = serde_json::to_value(&p.resolved.config).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    p.run.append_summary(&summary)?;
    if !p.quiet {
        summary.as_object_mut().map(|o| o.remove("config"));
        println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let p = prepare(&c)?;
            let out = harness::simulate(&p.resolved, p.mode)?;
            p.run
                .write_with("trajectory.csv", |w| out.trajectory.write_csv(p.resolved.config.save_stride, w))?;
            record(&p, out.summary())
        }
        Command::RbmErrorStudy { common, metric } => {
            let p = prepare(&common)?;
            let sizes = if p.p_list.is_empty() { vec![2, 4] } else { p.p_list.clone() };
            let metric = match metric {
                MetricArg::Rms => ErrorMetric::Rms,
                MetricArg::MeanNorm => ErrorMetric::MeanNorm,
            };
            let seed = common.seed.or(p.resolved.config.rbm.as_ref().map(|r| r.seed)).unwrap_or(0);
            let report = harness::rbm_error_study(&p.resolved, &sizes, p.resolved.config.replicas, seed, metric)?;
            p.run.write_with("error_study.csv", |w| write_error_study_csv(&report, w))?;
            record(&p, report.summary())
        }
        Command::Benchmark {
            common,
            repetitions,
            warmup,
        } => {
            let p = prepare(&common)?;
            let sizes = if p.p_list.is_empty() { vec![2, 4, 6, 9, 18] } else { p.p_list.clone() };
            let report = harness::benchmark(&p.resolved, &sizes, repetitions, warmup)?;
            p.run.write_with("benchmark.csv", |w| write_benchmark_csv(&report, w))?;
            record(&p, report.summary())
        }
        Command::Optimize(c) => {
            let p = prepare(&c)?;
            let out = harness::optimize(&p.resolved, p.mode)?;
            p.run.write_with("gd_log.csv", |w| out.result.write_log_csv(w))?;
            p.run
                .write_with("control.csv", |w| write_control_csv(&out.result.u_opt, &p.resolved.grid, w))?;
            record(&p, out.summary())
        }
        Command::Mpc(c) => {
            let p = prepare(&c)?;
            let res = harness::closed_loop(&p.resolved)?;
            p.run
                .write_with("control.csv", |w| write_control_csv(&res.applied_control, &p.resolved.grid, w))?;
            p.run
                .write_with("trajectory.csv", |w| res.plant_trajectory.write_csv(p.resolved.config.save_stride, w))?;
            p.run.write_with("windows.csv", |w| res.write_window_csv(w))?;
            let mut s = closed_loop_summary(&res);
            s["mode"] = json!(p.mode);
            record(&p, s)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match &e {
                e if e.is_config() => 2,
                Error::Io(_) => 1,
                _ => 3,
            })
        }
    }
}
