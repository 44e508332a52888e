use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rbm_mpc::harness::io::CONFIG_FILE;
use rbm_mpc::harness::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbm-mpc"))
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, cfg.to_toml_string()).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn last_summary(dir: &Path) -> serde_json::Value {
    let text = fs::read_to_string(dir.join("summary.jsonl")).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn simulate_saves_every_step_of_the_reference_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.toml", &ExperimentConfig::reference(10.0));
    let out = tmp.path().join("out");
    ok(&run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--mode", "full", "--quiet"]));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let times: std::collections::BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(times.len(), 1001);
    // 36 evader positions, 36 velocities, 2 drivers per saved step
    assert_eq!(csv.lines().count(), 1 + 1001 * 74);
    let s = last_summary(&out);
    assert_eq!(s["mode"], "full");
    assert!(s["cost"]["total"].as_f64().unwrap() > 0.0);
    assert_eq!(s["config"]["model"]["n_evaders"], 36);
}

#[test]
fn batch_runs_are_reproducible_and_replayable_from_their_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sim.toml", &ExperimentConfig::reference(1.0));
    let dirs: Vec<PathBuf> = ["a", "b"].iter().map(|n| tmp.path().join(n)).collect();
    for d in &dirs {
        ok(&run(&[
            "simulate", "--config", cfg.to_str().unwrap(), "--out", d.to_str().unwrap(), "--mode", "rbm", "--p", "2", "--seed", "99", "--quiet",
        ]));
    }
    let a = fs::read(dirs[0].join("trajectory.csv")).unwrap();
    assert_eq!(a, fs::read(dirs[1].join("trajectory.csv")).unwrap());
    assert_eq!(last_summary(&dirs[0])["batch_seed"], 99);

    // the embedded config reproduces the run without any overrides
    let embedded = dirs[0].join(CONFIG_FILE);
    let c = tmp.path().join("c");
    ok(&run(&["simulate", "--config", embedded.to_str().unwrap(), "--out", c.to_str().unwrap(), "--mode", "rbm", "--quiet"]));
    assert_eq!(a, fs::read(c.join("trajectory.csv")).unwrap());
    let strip = |p: PathBuf| ExperimentConfig {
        output_dir: None,
        ..ExperimentConfig::load(&p).unwrap()
    };
    assert_eq!(strip(dirs[0].join(CONFIG_FILE)), strip(c.join(CONFIG_FILE)));
}

#[test]
fn lattice_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference(1.0);
    cfg.model.n_evaders = 30;
    let path = write_config(tmp.path(), "bad.toml", &cfg);
    let out = run(&["simulate", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.n_evaders") && err.contains("initial.layout"), "{err}");

    fs::write(tmp.path().join("junk.toml"), "schema_version = 1\n[model]\nn_evaders = \"many\"\n").unwrap();
    let out = run(&["simulate", "--config", tmp.path().join("junk.toml").to_str().unwrap(), "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn collapsed_herd_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference(0.1);
    cfg.initial.half_width = 1e-14;
    let path = write_config(tmp.path(), "tiny.toml", &cfg);
    let out = run(&["simulate", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap(), "--mode", "full"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn optimised_control_round_trips_through_its_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference(0.3);
    cfg.model.n_evaders = 9;
    cfg.gd.max_iters = 20;
    let path = write_config(tmp.path(), "opt.toml", &cfg);
    let out = tmp.path().join("opt");
    ok(&run(&["optimize", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--mode", "full", "--quiet"]));
    let log = fs::read_to_string(out.join("gd_log.csv")).unwrap();
    assert!(log.starts_with("iter,cost,alpha,ev_count\n"));
    let summary = last_summary(&out);
    let replayed = summary["cost_replayed_full"]["total"].as_f64().unwrap();
    assert_eq!(summary["cost"]["total"].as_f64().unwrap(), replayed);

    cfg.control = Some(rbm_mpc::harness::config::ControlSection::File {
        path: out.join("control.csv"),
    });
    let sim_cfg = write_config(tmp.path(), "replay.toml", &cfg);
    let sim = tmp.path().join("sim");
    ok(&run(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--out", sim.to_str().unwrap(), "--mode", "full", "--quiet"]));
    let cost = last_summary(&sim)["cost"]["total"].as_f64().unwrap();
    assert_eq!(cost, replayed);
}

#[test]
fn study_and_benchmark_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference(0.2);
    cfg.save_stride = 10;
    let path = write_config(tmp.path(), "s.toml", &cfg);
    let out = tmp.path().join("study");
    ok(&run(&[
        "rbm-error-study", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--p", "2,36", "--replicas", "4", "--quiet",
    ]));
    let csv = fs::read_to_string(out.join("error_study.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert!(rows[0].starts_with("p,t,pos_median"));
    assert_eq!(rows.len(), 1 + 2 * 3);
    for row in rows.iter().filter(|r| r.starts_with("36,")) {
        let hi: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        assert!(hi <= 1e-12);
    }

    let out = tmp.path().join("bench");
    ok(&run(&[
        "benchmark", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--p", "2,4", "--repetitions", "10", "--warmup", "1", "--quiet",
    ]));
    let csv = fs::read_to_string(out.join("benchmark.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["mode", "mean_ms", "median_ms", "time_ratio", "interactions", "count_ratio"]);
    assert_eq!(rows[1][0], "Full");
    assert_eq!(rows[1][4], "8136");
    assert_eq!(rows[2][0], "P=2");
    assert_eq!(rows[2][3], "1.000000");
    assert_eq!(rows[3][4], "1224");
}

#[test]
fn mpc_writes_window_report() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::reference(0.4);
    cfg.model.n_evaders = 4;
    cfg.gd.max_iters = 5;
    cfg.mpc = Some(rbm_mpc::harness::config::MpcSection {
        tau: 0.15,
        t_hat: 0.3,
        predictor: rbm_mpc::harness::config::PredictorKind::Rbm,
        plant: rbm_mpc::harness::config::PlantSection::Deterministic,
    });
    let path = write_config(tmp.path(), "m.toml", &cfg);
    let out = tmp.path().join("mpc");
    ok(&run(&["mpc", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]));
    let csv = fs::read_to_string(out.join("windows.csv")).unwrap();
    let starts: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(starts, ["0", "0.15", "0.3"]);
    assert!(out.join("control.csv").exists() && out.join("trajectory.csv").exists());
    assert_eq!(ExperimentConfig::load(&out.join(CONFIG_FILE)).unwrap().mpc, cfg.mpc);
}
