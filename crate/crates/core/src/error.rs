use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Grid;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: Grid, found: Grid },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("point {index} ({coords:?}) lies outside the open domain (-{extent}, {extent})^dim")]
    PointOutsideDomain {
        index: usize,
        coords: Vec<f64>,
        extent: f64,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("fast sweeping did not converge after {rounds} rounds (last max update {residual:e})")]
    SweepNotConverged { rounds: usize, residual: f64 },

    #[error("degenerate indicator: {0}")]
    Degenerate(String),

    #[error("empty level set: iso value {iso} is outside the field range [{min}, {max}]")]
    EmptyLevelSet { iso: f64, min: f64, max: f64 },

    #[error(
        "energy increased at stage {stage}, iteration {iteration}: {before:e} -> {after:e} (tolerance {tolerance:e})"
    )]
    EnergyIncrease {
        stage: usize,
        iteration: usize,
        before: f64,
        after: f64,
        tolerance: f64,
    },

    #[error("grid too large for direct summation: {nodes} nodes (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    #[error("malformed field dump: {0}")]
    BadDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
