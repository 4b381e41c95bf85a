//! Reconstruction of closed curves and surfaces from point clouds by
//! distance-weighted threshold dynamics on periodic grids.
//!
//! The pipeline: sample a [`grid::Grid`], compute the distance to the cloud
//! ([`distance`]), build weights `d^p` or `d^(p/2)`, then alternate Gaussian
//! convolution ([`heat`]) with pointwise thresholding ([`solver`]) until the
//! indicator stops changing. [`extract`] turns the final indicator into
//! polylines or triangle meshes.

pub mod cloud;
pub mod distance;
pub mod error;
pub mod extract;
pub mod grid;
pub mod heat;
pub mod pipeline;
pub mod solver;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use grid::{Grid, IndicatorField, ScalarField};
pub use heat::{HeatKernel, SpectralPlan};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
