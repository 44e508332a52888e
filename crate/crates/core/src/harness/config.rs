//! Experiment configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! replicas = 200
//! save_stride = 1
//!
//! [model]
//! n_evaders = 36
//! n_drivers = 2
//! dim = 2
//!
//! [grid]
//! dt = 0.01
//! horizon = 10.0
//!
//! [initial]
//! layout = "lattice"
//! half_width = 0.2
//! drivers = [[-1.0, 0.0], [0.0, -1.0]]
//!
//! [control]
//! kind = "constant"
//! values = [[0.2, 0.02], [0.02, 0.2]]
//!
//! [rbm]
//! batch_size = 2
//! seed = 7
//! ```
//!
//! Omitted kernel and cost sections fall back to the reference constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlSchedule, CostParams, Grid, ModelParams, State};
use crate::error::{Error, Result};
use crate::harness::io::read_control_csv;
use crate::kernels::KernelParams;
use crate::mpc::{MpcConfig, PlantKind, Predictor};
use crate::optimizer::GdConfig;
use crate::scenario;
use crate::stochastic::SdeParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rbm: Option<RbmSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sde: Option<SdeParams>,
    #[serde(default)]
    pub gd: GdConfig,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_stride")]
    pub save_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_replicas() -> usize {
    200
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_evaders: usize,
    pub n_drivers: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dt: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Lattice,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub layout: Layout,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Required for the uniform layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Optional explicit lattice side; must satisfy `side^dim == n_evaders`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_side: Option<usize>,
    pub drivers: Vec<Vec<f64>>,
}

fn default_half_width() -> f64 {
    scenario::REFERENCE_HALF_WIDTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlSection {
    /// One velocity per driver, held for the whole horizon.
    Constant { values: Vec<Vec<f64>> },
    /// A control CSV as written by the `optimize` command.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbmSection {
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Full,
    Rbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSection {
    Deterministic,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    pub tau: f64,
    pub t_hat: f64,
    pub predictor: PredictorKind,
    #[serde(default = "default_plant")]
    pub plant: PlantSection,
}

fn default_plant() -> PlantSection {
    PlantSection::Deterministic
}

/// Which dynamics a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Full,
    Rbm,
}

/// A validated configuration with every derived object built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub model: ModelParams,
    pub grid: Grid,
    pub initial: State,
    /// Control over the configured grid.
    pub control: ControlSchedule,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The reference guiding setup with the constant north-east control.
    pub fn reference(horizon: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSection {
                n_evaders: scenario::REFERENCE_N,
                n_drivers: 2,
                dim: 2,
                kernel: None,
                cost: None,
            },
            grid: GridSection {
                dt: scenario::REFERENCE_DT,
                horizon,
            },
            initial: InitialSection {
                layout: Layout::Lattice,
                half_width: scenario::REFERENCE_HALF_WIDTH,
                seed: None,
                lattice_side: None,
                drivers: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            },
            control: Some(ControlSection::Constant {
                values: vec![vec![0.2, 0.02], vec![0.02, 0.2]],
            }),
            rbm: Some(RbmSection { batch_size: 2, seed: 1 }),
            mpc: None,
            sde: None,
            gd: GdConfig::default(),
            replicas: default_replicas(),
            save_stride: 1,
            output_dir: None,
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        let m = &self.model;
        if m.n_evaders == 0 {
            return Err(cfg_err("model.n_evaders must be >= 1"));
        }
        if m.n_drivers == 0 {
            return Err(cfg_err("model.n_drivers must be >= 1"));
        }
        if m.dim == 0 {
            return Err(cfg_err("model.dim must be >= 1"));
        }
        let kernel = m.kernel.unwrap_or_else(|| KernelParams::reference(m.n_evaders));
        kernel.validate().map_err(|e| cfg_err(format!("model.kernel: {e}")))?;
        let cost = match &m.cost {
            Some(c) => c.clone(),
            None if m.dim == 2 => scenario::reference_cost(),
            None => return Err(cfg_err("model.cost is required when model.dim != 2")),
        };
        cost.validate(m.dim).map_err(|e| cfg_err(format!("model.cost: {e}")))?;
        Ok(ModelParams {
            n_evaders: m.n_evaders,
            n_drivers: m.n_drivers,
            dim: m.dim,
            kernel,
            cost,
        })
    }

    fn initial_state(&self, mp: &ModelParams) -> Result<State> {
        let init = &self.initial;
        if init.drivers.len() != mp.n_drivers || init.drivers.iter().any(|d| d.len() != mp.dim) {
            return Err(cfg_err(format!(
                "initial.drivers must list model.n_drivers = {} points of model.dim = {} coordinates",
                mp.n_drivers, mp.dim
            )));
        }
        if !(init.half_width > 0.0) {
            return Err(cfg_err("initial.half_width must be > 0"));
        }
        let y: Vec<f64> = init.drivers.iter().flatten().copied().collect();
        let x = match init.layout {
            Layout::Lattice => {
                let side = match init.lattice_side {
                    Some(side) => {
                        if side.checked_pow(mp.dim as u32) != Some(mp.n_evaders) {
                            return Err(cfg_err(format!(
                                "model.n_evaders = {} does not match initial.lattice_side = {side} in model.dim = {} \
                                 (side^dim = {})",
                                mp.n_evaders,
                                mp.dim,
                                side.saturating_pow(mp.dim as u32)
                            )));
                        }
                        side
                    }
                    None => scenario::lattice_side(mp.n_evaders, mp.dim).ok_or_else(|| {
                        cfg_err(format!(
                            "model.n_evaders = {} is not a perfect power of model.dim = {}, required by initial.layout = \"lattice\"",
                            mp.n_evaders, mp.dim
                        ))
                    })?,
                };
                scenario::lattice_positions(side, mp.dim, init.half_width)
            }
            Layout::Uniform => {
                let seed = init.seed.ok_or_else(|| cfg_err("initial.seed is required for initial.layout = \"uniform\""))?;
                scenario::uniform_positions(mp.n_evaders, mp.dim, init.half_width, seed)
            }
        };
        State::new(mp.dim, x, vec![0.0; mp.n_evaders * mp.dim], y).map_err(|e| cfg_err(format!("initial: {e}")))
    }

    fn control_schedule(&self, mp: &ModelParams, grid: &Grid, base: &Path) -> Result<ControlSchedule> {
        match &self.control {
            None => Ok(ControlSchedule::zeros(grid.n_steps, mp.n_drivers, mp.dim)),
            Some(ControlSection::Constant { values }) => {
                if values.len() != mp.n_drivers || values.iter().any(|v| v.len() != mp.dim) {
                    return Err(cfg_err(format!(
                        "control.values must list model.n_drivers = {} vectors of model.dim = {} entries",
                        mp.n_drivers, mp.dim
                    )));
                }
                let flat: Vec<f64> = values.iter().flatten().copied().collect();
                ControlSchedule::constant(grid.n_steps, &flat, mp.n_drivers, mp.dim)
            }
            Some(ControlSection::File { path }) => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let file = std::fs::File::open(&full).map_err(|e| cfg_err(format!("control.path {}: {e}", full.display())))?;
                let u = read_control_csv(file, mp.n_drivers, mp.dim)
                    .map_err(|e| cfg_err(format!("control.path {}: {e}", full.display())))?;
                if u.n_steps() != grid.n_steps {
                    return Err(cfg_err(format!(
                        "control file has {} steps but grid.horizon / grid.dt gives {}",
                        u.n_steps(),
                        grid.n_steps
                    )));
                }
                Ok(u)
            }
        }
    }

    /// Validate every section and build the model objects. Relative control file paths
    /// resolve against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let model = self.model_params()?;
        let grid = Grid::new(self.grid.dt, self.grid.horizon).map_err(|e| cfg_err(format!("grid: {e}")))?;
        if grid.n_steps == 0 {
            return Err(cfg_err("grid.horizon must cover at least one grid.dt step"));
        }
        let initial = self.initial_state(&model)?;
        let control = self.control_schedule(&model, &grid, base)?;
        if let Some(r) = &self.rbm {
            if r.batch_size < 2 || r.batch_size > model.n_evaders {
                return Err(cfg_err(format!(
                    "rbm.batch_size = {} must lie in [2, model.n_evaders = {}]",
                    r.batch_size, model.n_evaders
                )));
            }
        }
        if let Some(sde) = &self.sde {
            sde.validate().map_err(|e| cfg_err(format!("sde: {e}")))?;
        }
        self.gd.validate().map_err(|e| cfg_err(format!("gd: {e}")))?;
        if self.save_stride == 0 {
            return Err(cfg_err("save_stride must be >= 1"));
        }
        if let Some(m) = &self.mpc {
            for (name, span) in [("mpc.tau", m.tau), ("mpc.t_hat", m.t_hat)] {
                grid.steps_for(span, name).map_err(|e| cfg_err(e.to_string()))?;
            }
            if m.tau > m.t_hat + 1e-12 {
                return Err(cfg_err("mpc.tau must not exceed mpc.t_hat"));
            }
            if m.predictor == PredictorKind::Rbm && self.rbm.is_none() {
                return Err(cfg_err("mpc.predictor = \"rbm\" needs an [rbm] section"));
            }
            if m.plant == PlantSection::Noisy && self.sde.is_none() {
                return Err(cfg_err("mpc.plant = \"noisy\" needs an [sde] section"));
            }
        }
        Ok(Resolved {
            config: self.clone(),
            model,
            grid,
            initial,
            control,
        })
    }
}

impl Resolved {
    pub fn rbm(&self) -> Result<&RbmSection> {
        self.config.rbm.as_ref().ok_or_else(|| cfg_err("this run needs an [rbm] section"))
    }

    /// MPC settings plus the first-window guess (the configured control over `t_hat`).
    pub fn mpc(&self) -> Result<(MpcConfig, PlantKind, ControlSchedule)> {
        let m = self.config.mpc.as_ref().ok_or_else(|| cfg_err("this run needs an [mpc] section"))?;
        let predictor = match m.predictor {
            PredictorKind::Full => Predictor::Full,
            PredictorKind::Rbm => {
                let r = self.rbm()?;
                Predictor::Rbm {
                    batch_size: r.batch_size,
                    seed: r.seed,
                }
            }
        };
        let plant = match m.plant {
            PlantSection::Deterministic => PlantKind::Deterministic,
            PlantSection::Noisy => PlantKind::Noisy(self.config.sde.ok_or_else(|| cfg_err("mpc.plant = \"noisy\" needs [sde]"))?),
        };
        let hat_steps = self.grid.steps_for(m.t_hat, "mpc.t_hat")?;
        let guess = if hat_steps <= self.control.n_steps() {
            self.control.slice(0, hat_steps)
        } else {
            // extend by holding the last configured value
            let mut g = self.control.clone();
            let last = self.control.at(self.control.n_steps() - 1).to_vec();
            for _ in self.control.n_steps()..hat_steps {
                g.values.extend_from_slice(&last);
            }
            g
        };
        let cfg = MpcConfig {
            tau: m.tau,
            t_hat: m.t_hat,
            total_horizon: self.grid.horizon(),
            predictor,
            gd: self.config.gd,
        };
        Ok((cfg, plant, guess))
    }
}
