//! Guiding a herd of evaders with repulsive drivers.
//!
//! The crate simulates the guidance-by-repulsion particle model, its random batch
//! reduction, gradient-based open-loop optimal control through the exact discrete
//! adjoint, and a receding-horizon (MPC) loop that can drive a deterministic or a
//! noisy plant.
//!
//! | module | contents |
//! |---|---|
//! | [`kernels`] | interaction kernels and their Jacobians |
//! | [`dynamics`] | model types, full and batch right-hand sides, Euler integration |
//! | [`adjoint`] | cost, costate sweep, control gradient |
//! | [`optimizer`] | halving/doubling gradient descent |
//! | [`mpc`] | closed loop |
//! | [`stochastic`] | Milstein integration of the noisy plant |
//! | [`harness`] | configuration, experiments, reports and output files |
//! | [`scenario`] | reference initial data and layouts |
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod adjoint;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod mpc;
pub mod optimizer;
pub mod scenario;
pub mod stochastic;

pub use adjoint::{control_gradient, cost_and_gradient, integrate_costate, running_cost, total_cost, CostBreakdown, CostateTrajectory};
pub use dynamics::{
    adjacency, full_rhs, integrate_forward, interaction_count, rbm_rhs, sample_batch_schedule, BatchSchedule, ControlSchedule, CostParams,
    Grid, ModelParams, Mode, State, Trajectory,
};
pub use error::{Error, Result};
pub use kernels::{eval_a, eval_f, eval_g, force_and_jacobian, Kernel, KernelParams};
pub use mpc::{run_mpc, ClosedLoopResult, MpcConfig, PlantKind, Predictor};
pub use optimizer::{solve_ocp, GdConfig, OcpResult};
pub use stochastic::{integrate_sde, SdeParams};
