use thiserror::Error;

/// Errors raised by the simulation, control and harness layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two evaders coincide, so the repulsive core of `g` is singular.
    #[error("degenerate input: evaders {i} and {k} coincide (|x_k - x_i| < 1e-12)")]
    Degenerate { i: usize, k: usize },

    #[error("integration failed at step {step}: {source}")]
    Integration {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("optimization failed at iterate {iter}: {reason}")]
    OptimizationFailed { iter: usize, reason: String },

    #[error("MPC window {window}: {source}")]
    Window {
        window: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error comes from bad configuration rather than from the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::ScheduleMismatch(_) => true,
            Error::Window { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
