use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::SolveError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("step {t} out of range (grid has {n_steps} steps)")]
    StepOutOfRange { t: usize, n_steps: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("solver failed at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolveError,
    },

    #[error("SOC {soc} outside [{min}, {max}] at step {step}")]
    SocOutOfRange { step: usize, soc: f64, min: f64, max: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error in {}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: crate::io::SeriesError,
    },

    #[error("nothing to report: {0}")]
    EmptyTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
