//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid torque surface: {0}")]
    InvalidSurface(String),
    #[error("invalid startup parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("simulation state became non-finite at t = {t:.3} s")]
    NonFiniteState { t: f64 },
    #[error("signal is empty")]
    EmptySignal,
    #[error("sampling rate {f_m} Hz is not an integer multiple of {f_e} Hz")]
    IncompatibleRates { f_m: f64, f_e: f64 },
    #[error("network has no running statistics; train it before inference")]
    UntrainedNet,
    #[error("standard deviation must be strictly positive (got {0})")]
    NonPositiveSigma(f64),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("dataset strain range is degenerate (max = min = {0})")]
    DegenerateDataset(f64),
    #[error("no initial point produced a finite cost")]
    NoFeasibleStart,
    #[error("no grid point satisfies the startup-time constraint")]
    NoFeasiblePoint,
    #[error("campaign budget is exhausted")]
    CampaignExhausted,
    #[error("measurement rejected: {0}")]
    ValidationFailure(String),
    #[error("state file version {found} is incompatible with version {expected}")]
    StateVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
