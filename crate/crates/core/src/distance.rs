//! Unsigned distance to a point cloud on a grid.
//!
//! [`distance_brute`] evaluates `min_y |x - y|` at every node and is exact.
//! [`distance_sweep`] relaxes the eikonal equation `|∇d| = 1` with a first-order
//! Lax–Friedrichs scheme and Gauss–Seidel sweeps in all `2^dim` orderings:
//!
//! ```text
//! d_new = h/n (1 - |∇d|) + 1/(2n) Σ_axes (d_{+} + d_{-}),   |∇d| by central differences
//! ```
//!
//! which for `n = 2`, `h = 1` is the familiar
//! `½ (1 - |∇d| + (d_E + d_W)/2 + (d_N + d_S)/2)`. Nodes within `freeze_radius`
//! cells (Chebyshev) of a cloud point hold their exact distance and are never
//! updated. The metric is Euclidean, not periodic.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Clouds times nodes above which [`DistanceBackend::Auto`] switches to sweeping.
pub const BRUTE_FORCE_BUDGET: usize = 2_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    /// Stop once a whole round changes no node by more than this.
    pub tolerance: f64,
    /// One round visits all `2^dim` sweep orderings.
    pub max_rounds: usize,
    /// Source neighbourhood in cells, Chebyshev metric.
    pub freeze_radius: usize,
}

impl SweepConfig {
    /// Tolerance `1e-6 h`, 500 rounds, freeze radius 1.
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            tolerance: 1e-6 * grid.spacing(),
            max_rounds: 500,
            freeze_radius: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan()
            || self.tolerance <= 0.0
            || self.max_rounds == 0
            || self.freeze_radius == 0
        {
            return Err(Error::InvalidArgument(format!(
                "sweep config needs tolerance > 0, max_rounds >= 1, freeze_radius >= 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceBackend {
    Brute,
    Sweep(SweepConfig),
    /// Brute force while `points * nodes <= BRUTE_FORCE_BUDGET`, sweeping otherwise.
    Auto,
}

impl DistanceBackend {
    pub fn resolve(&self, cloud: &PointCloud, grid: &Grid) -> DistanceBackend {
        match self {
            DistanceBackend::Auto => {
                if cloud.len().saturating_mul(grid.len()) <= BRUTE_FORCE_BUDGET {
                    DistanceBackend::Brute
                } else {
                    DistanceBackend::Sweep(SweepConfig::for_grid(grid))
                }
            }
            other => *other,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistanceBackend::Brute => "brute",
            DistanceBackend::Sweep(_) => "sweep",
            DistanceBackend::Auto => "auto",
        }
    }
}

pub fn compute_distance(
    cloud: &PointCloud,
    grid: &Grid,
    backend: DistanceBackend,
) -> Result<ScalarField> {
    match backend.resolve(cloud, grid) {
        DistanceBackend::Brute => distance_brute(cloud, grid),
        DistanceBackend::Sweep(cfg) => distance_sweep(cloud, grid, &cfg).map(|s| s.field),
        DistanceBackend::Auto => unreachable!("resolved above"),
    }
}

#[inline]
fn nearest(cloud: &PointCloud, x: &[f64]) -> f64 {
    cloud
        .points()
        .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

pub fn distance_brute(cloud: &PointCloud, grid: &Grid) -> Result<ScalarField> {
    cloud.check_inside(grid)?;
    let dim = grid.dim();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| nearest(cloud, &grid.node(i)[..dim]))
        .collect();
    Ok(ScalarField::from_finite(*grid, values))
}

/// Sweeping output plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub field: ScalarField,
    pub rounds: usize,
    pub residual: f64,
    pub frozen: Vec<bool>,
}

fn frozen_mask(cloud: &PointCloud, grid: &Grid, radius: usize) -> Vec<bool> {
    let dim = grid.dim();
    let n = grid.cells_per_axis() as isize;
    let h = grid.spacing();
    let reach = radius as f64 * h * (1.0 + 1e-12);
    let mut mask = vec![false; grid.len()];
    for p in cloud.points() {
        let mut lo = [0isize; 3];
        let mut hi = [0isize; 3];
        for a in 0..dim {
            let t = (p[a] + grid.extent()) / h;
            lo[a] = ((t - radius as f64).ceil() as isize).max(0);
            hi[a] = ((t + radius as f64).floor() as isize).min(n - 1);
        }
        let extents: Vec<usize> = (0..dim).map(|a| (hi[a] - lo[a] + 1) as usize).collect();
        let count: usize = extents.iter().product();
        for mut c in 0..count {
            let mut flat = 0usize;
            let mut inside = true;
            for a in (0..dim).rev() {
                let i = lo[a] as usize + c % extents[a];
                c /= extents[a];
                flat += i * grid.stride(a);
                inside &= (grid.coord(i) - p[a]).abs() <= reach;
            }
            if inside {
                mask[flat] = true;
            }
        }
    }
    mask
}

pub fn distance_sweep(cloud: &PointCloud, grid: &Grid, cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    cloud.check_inside(grid)?;
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let h = grid.spacing();
    let frozen = frozen_mask(cloud, grid, cfg.freeze_radius);

    let far = 2.0 * grid.extent() * (dim as f64).sqrt();
    let mut d: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if frozen[i] {
                nearest(cloud, &grid.node(i)[..dim])
            } else {
                far
            }
        })
        .collect();

    let strides: Vec<usize> = (0..dim).map(|a| grid.stride(a)).collect();
    let inv_2h = 0.5 / h;
    let relax = h / dim as f64;
    let avg = 0.5 / dim as f64;

    let mut residual = f64::INFINITY;
    for round in 1..=cfg.max_rounds {
        let mut round_change: f64 = 0.0;
        for ordering in 0..(1usize << dim) {
            for counter in 0..grid.len() {
                let mut idx = grid.unflat(counter);
                let mut flat = 0;
                let mut interior = true;
                for a in 0..dim {
                    if ordering & (1 << a) != 0 {
                        idx[a] = n - 1 - idx[a];
                    }
                    interior &= idx[a] > 0 && idx[a] < n - 1;
                    flat += idx[a] * strides[a];
                }
                if !interior || frozen[flat] {
                    continue;
                }
                let mut grad2 = 0.0;
                let mut sum = 0.0;
                for &s in &strides {
                    let (plus, minus) = (d[flat + s], d[flat - s]);
                    let g = (plus - minus) * inv_2h;
                    grad2 += g * g;
                    sum += plus + minus;
                }
                let candidate = relax * (1.0 - grad2.sqrt()) + avg * sum;
                let old = d[flat];
                if candidate < old {
                    d[flat] = candidate;
                    round_change = round_change.max(old - candidate);
                }
            }
            round_change = round_change.max(extrapolate_boundary(&mut d, grid, &frozen));
        }
        residual = round_change;
        if round_change < cfg.tolerance {
            let field = ScalarField::from_values(*grid, d)?;
            return Ok(SweepOutcome {
                field,
                rounds: round,
                residual,
                frozen,
            });
        }
    }
    Err(Error::SweepNotConverged {
        rounds: cfg.max_rounds,
        residual,
    })
}

/// `d_0 = min(max(2 d_1 - d_2, d_2), d_0)` on every face, axis by axis.
fn extrapolate_boundary(d: &mut [f64], grid: &Grid, frozen: &[bool]) -> f64 {
    let dim = grid.dim();
    let n = grid.cells_per_axis();
    let mut change: f64 = 0.0;
    for axis in 0..dim {
        let s = grid.stride(axis);
        for flat in 0..grid.len() {
            if frozen[flat] {
                continue;
            }
            let i = grid.unflat(flat)[axis];
            let (a, b) = if i == 0 {
                (flat + s, flat + 2 * s)
            } else if i == n - 1 {
                (flat - s, flat - 2 * s)
            } else {
                continue;
            };
            let candidate = (2.0 * d[a] - d[b]).max(d[b]);
            if candidate < d[flat] {
                change = change.max(d[flat] - candidate);
                d[flat] = candidate;
            }
        }
    }
    change
}

/// Which power of the distance a weight field holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `d^p`, for the symmetric energy.
    Full,
    /// `d^(p/2)`, for the factored energy.
    Half,
}

pub fn weight_field(d: &ScalarField, p: f64, mode: WeightMode) -> Result<ScalarField> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "exponent p must be positive, got {p}"
        )));
    }
    if let Some(i) = d.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distance field is negative ({}) at node {i}",
            d.values()[i]
        )));
    }
    let e = match mode {
        WeightMode::Full => p,
        WeightMode::Half => 0.5 * p,
    };
    d.map(|v| v.powf(e))
}
