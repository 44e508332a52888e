use std::path::Path;

use rbm_mpc::dynamics::{integrate_forward, Mode, State};
use rbm_mpc::harness::config::{MpcSection, PlantSection, PredictorKind};
use rbm_mpc::harness::{closed_loop, optimize, ExperimentConfig, RunMode};
use rbm_mpc::{cost_and_gradient, scenario, solve_ocp, total_cost, GdConfig, Grid};

/// Relabel evaders: new index `k` holds old evader `perm[k]`.
fn permute(s: &State, perm: &[usize]) -> State {
    let d = s.dim;
    let pick = |a: &[f64]| perm.iter().flat_map(|&i| a[i * d..(i + 1) * d].to_vec()).collect::<Vec<_>>();
    State::new(d, pick(&s.x), pick(&s.v), s.y.clone()).unwrap()
}

#[test]
fn cost_gradient_and_optimum_ignore_evader_labels() {
    let mp = scenario::planar_model(9, 2);
    let s0 = scenario::random_state(&mp, 0.3, 12);
    let perm = [4, 7, 0, 8, 2, 6, 1, 3, 5];
    let s1 = permute(&s0, &perm);
    let grid = Grid::with_steps(0.01, 40);
    let u = scenario::reference_control(40);

    let (c0, g0) = cost_and_gradient(&s0, &u, &grid, &mp, Mode::Full).unwrap();
    let (c1, g1) = cost_and_gradient(&s1, &u, &grid, &mp, Mode::Full).unwrap();
    assert!((c0.total - c1.total).abs() < 1e-13 * c0.total.abs().max(1.0));
    for (a, b) in g0.values.iter().zip(&g1.values) {
        assert!((a - b).abs() < 1e-12);
    }

    let gd = GdConfig {
        max_iters: 30,
        ..GdConfig::default()
    };
    let r0 = solve_ocp(&s0, &u, &grid, &mp, Mode::Full, &gd).unwrap();
    let r1 = solve_ocp(&s1, &u, &grid, &mp, Mode::Full, &gd).unwrap();
    assert_eq!(r0.gd_iterations, r1.gd_iterations);
    for (a, b) in r0.u_opt.values.iter().zip(&r1.u_opt.values) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn euler_converges_at_first_order() {
    let mp = scenario::reference_model();
    let s0 = scenario::reference_state();
    let at_one = |dt: f64| {
        let grid = Grid::new(dt, 1.0).unwrap();
        let u = scenario::reference_control(grid.n_steps);
        integrate_forward(&s0, &u, &grid, &mp, Mode::Full).unwrap().last().clone()
    };
    let reference = at_one(0.01 / 64.0);
    let errs: Vec<f64> = [0.02, 0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| {
            let s = at_one(dt);
            s.x.iter().zip(&reference.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..2.4).contains(&ratio), "ratio {ratio} in {errs:?}");
    }
}

#[test]
fn one_window_loop_equals_open_loop_replay() {
    let mut cfg = ExperimentConfig::reference(0.5);
    cfg.model.n_evaders = 9;
    cfg.gd.max_iters = 25;
    cfg.mpc = Some(MpcSection {
        tau: 0.5,
        t_hat: 0.5,
        predictor: PredictorKind::Full,
        plant: PlantSection::Deterministic,
    });
    let r = cfg.resolve(Path::new(".")).unwrap();
    let cl = closed_loop(&r).unwrap();
    let ol = optimize(&r, RunMode::Full).unwrap();
    assert_eq!(cl.window_reports.len(), 1);
    assert_eq!(cl.applied_control, ol.result.u_opt);
    assert_eq!(cl.realized_cost, ol.replay_full);
}

#[test]
fn longer_predictive_horizon_still_tiles_the_plant_horizon() {
    let mut cfg = ExperimentConfig::reference(0.3);
    cfg.model.n_evaders = 4;
    cfg.gd.max_iters = 5;
    cfg.mpc = Some(MpcSection {
        tau: 0.1,
        t_hat: 0.25,
        predictor: PredictorKind::Rbm,
        plant: PlantSection::Deterministic,
    });
    let r = cfg.resolve(Path::new(".")).unwrap();
    let cl = closed_loop(&r).unwrap();
    assert_eq!(cl.window_reports.len(), 3);
    assert_eq!(cl.applied_control.n_steps(), 30);
    assert_eq!(cl.plant_trajectory.states.len(), 31);
    let replay = integrate_forward(&r.initial, &cl.applied_control, &r.grid, &r.model, Mode::Full).unwrap();
    assert_eq!(replay, cl.plant_trajectory);
    assert_eq!(total_cost(&replay, &cl.applied_control, &r.model.cost), cl.realized_cost);
    for w in &cl.window_reports {
        assert!(w.t_apply_end <= w.t_predict_end + 1e-12);
    }
}
