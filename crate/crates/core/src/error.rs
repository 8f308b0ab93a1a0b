use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("propagation interval must be positive (z_start = {z_start}, z_end = {z_end})")]
    InvalidInterval { z_start: f64, z_end: f64 },

    #[error("focal singularity: |sin(omega * dz)| = {sin_abs:e} is below {tolerance:e}")]
    FocalSingularity { sin_abs: f64, tolerance: f64 },

    #[error("position {x} mm lies outside the grid [{lo}, {hi}] mm")]
    OffGrid { x: f64, lo: f64, hi: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("every sample fell below the division floor")]
    DivisionFloor,

    #[error("zero-momentum amplitude vanishes (|Phi(0)|^2 / norm = {ratio:e})")]
    VanishingZeroMomentum { ratio: f64 },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("no overlap between curves: {0}")]
    NoOverlap(String),

    #[error("smoothing window must be odd and in [1, {max}], got {window}")]
    InvalidWindow { window: usize, max: usize },

    #[error("integration support [{lo}, {hi}] mm does not cover the requested length {length} mm")]
    SupportTooSmall { lo: f64, hi: f64, length: f64 },

    #[error("undefined g2 estimate: {0}")]
    UndefinedEstimate(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
