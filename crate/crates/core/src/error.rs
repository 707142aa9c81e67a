use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {constraint} (got {value})")]
    InvalidParameter {
        name: &'static str,
        constraint: String,
        value: f64,
    },

    #[error("weight exponent {alpha} is not integrable across the origin (need alpha > -1)")]
    UnsupportedWeight { alpha: f64 },

    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid half-width {x_max} cannot contain the light cone up to {required}")]
    GridTooSmall { x_max: f64, required: f64 },

    #[error("field support reaches the grid boundary")]
    SupportAtBoundary,

    #[error("non-finite value in field at node {index}")]
    NonFinite { index: usize },

    #[error("point (level {level}, node {node}) is not on the cone lattice")]
    LatticeMisalignment { level: usize, node: isize },

    #[error("Picard iteration failed to contract after {iterations} iterations (last change {last_change:e})")]
    NonContraction { iterations: usize, last_change: f64 },

    #[error("no blow-up below cap {cap:e} before horizon {horizon}")]
    NoBlowupWithinHorizon { cap: f64, horizon: f64 },

    #[error("trajectory never reaches 2 F(0) by t0 = {t0} (F(t0) = {value})")]
    NoDoubling { t0: f64, value: f64 },

    #[error("trial function is identically zero")]
    ZeroFunction,

    #[error("{needed} usable points required, only {available} available")]
    InsufficientPoints { needed: usize, available: usize },

    #[error("all {runs} sweep runs failed to blow up")]
    AllRunsFailed { runs: usize },

    #[error("no recorded snapshot with t > R")]
    NoInteriorSnapshot,

    #[error("{0}")]
    Precondition(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config: {0}")]
    ConfigValue(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, constraint: impl Into<String>, value: f64) -> Error {
    Error::InvalidParameter {
        name,
        constraint: constraint.into(),
        value,
    }
}
