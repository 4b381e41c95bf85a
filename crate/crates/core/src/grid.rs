//! Uniform periodic grids on `[-extent, extent)^dim` and the fields sampled on them.
//!
//! Nodes are centered: index `i` along an axis sits at `-extent + i * h` with
//! `h = 2 * extent / n`, so the node at `+extent` is identified with the one at
//! `-extent`. Storage is flat row-major with the last axis fastest.

use std::fmt;

use crate::error::{Error, Result};

pub mod dump;

/// Smallest accepted number of cells per axis.
pub const MIN_CELLS: usize = 8;

/// Uniform periodic grid with the same resolution on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    extent: f64,
    h: f64,
}

impl Grid {
    pub fn new(dim: usize, cells_per_axis: usize, extent: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be 2 or 3, got {dim}"
            )));
        }
        if cells_per_axis < MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {MIN_CELLS} cells per axis, got {cells_per_axis}"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid extent must be positive and finite, got {extent}"
            )));
        }
        Ok(Self {
            dim,
            n: cells_per_axis,
            extent,
            h: 2.0 * extent / cells_per_axis as f64,
        })
    }

    /// The `[-π, π]^dim` grid used throughout the reconstruction experiments.
    pub fn centered_pi(dim: usize, cells_per_axis: usize) -> Result<Self> {
        Self::new(dim, cells_per_axis, std::f64::consts::PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^dim` used by every node-sum quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Coordinate of node index `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.h
    }

    /// Periodic reduction of a signed index into `[0, n)`.
    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.n as isize) as usize
    }

    /// Stride of `axis` in the flat layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Flat index of a multi-index (unwrapped; each component must be `< n`).
    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dim);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Multi-index of a flat index; only the first `dim` entries are meaningful.
    #[inline]
    pub fn unflat(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.n;
            flat /= self.n;
        }
        out
    }

    /// Node coordinates of a flat index; only the first `dim` entries are meaningful.
    #[inline]
    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflat(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// Flat index of the neighbor reached by stepping `step` along `axis`, wrapping.
    #[inline]
    pub fn neighbor(&self, flat: usize, axis: usize, step: isize) -> usize {
        let idx = self.unflat(flat);
        let stride = self.stride(axis);
        let moved = self.wrap(idx[axis] as isize + step);
        flat - idx[axis] * stride + moved * stride
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: *self,
                found: *other,
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims = vec![self.n.to_string(); self.dim].join("x");
        write!(
            f,
            "{dims} on [-{e}, {e})^{d}",
            e = self.extent,
            d = self.dim
        )
    }
}

/// Real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values but grid {grid} has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: pos,
                value: values[pos],
            });
        }
        Ok(Self { grid, values })
    }

    /// Constructor for values already known to be finite.
    pub(crate) fn from_finite(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { grid, values }
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.len()])
    }

    /// Evaluates `f` at every node coordinate.
    pub fn sample<F>(grid: Grid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let dim = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.node(i)[..dim])).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Node-sum quadrature `h^dim * Σ values`.
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_volume()
    }

    /// Applies `f` nodewise, rejecting non-finite results.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        Self::from_values(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Binary field on a grid: `true` is the inside of the implicit interface.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    grid: Grid,
    values: Vec<bool>,
}

impl IndicatorField {
    pub fn from_values(grid: Grid, values: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "indicator has {} values but grid {grid} has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn filled(grid: Grid, value: bool) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Indicator of the set where `inside` holds at the node coordinate.
    pub fn from_predicate<F>(grid: Grid, inside: F) -> Self
    where
        F: Fn(&[f64]) -> bool,
    {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| inside(&grid.node(i)[..dim]))
            .collect();
        Self { grid, values }
    }

    /// Reads `0`/`1` bytes; any other byte is rejected.
    pub fn from_bytes(grid: Grid, bytes: &[u8]) -> Result<Self> {
        let values = bytes
            .iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidArgument(format!(
                    "indicator byte {other} at node {i} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, flat: usize) -> bool {
        self.values[flat]
    }

    pub fn set(&mut self, flat: usize, inside: bool) {
        self.values[flat] = inside;
    }

    pub fn count_inside(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn is_all_outside(&self) -> bool {
        !self.values.iter().any(|&v| v)
    }

    pub fn is_all_inside(&self) -> bool {
        self.values.iter().all(|&v| v)
    }

    /// Number of nodes where the two indicators differ.
    pub fn hamming(&self, other: &IndicatorField) -> usize {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// The indicator as a 0/1 real field.
    pub fn to_scalar(&self) -> ScalarField {
        ScalarField::from_finite(
            self.grid,
            self.values
                .iter()
                .map(|&v| if v { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    /// Volume of the inside region by node counting.
    pub fn volume(&self) -> f64 {
        self.count_inside() as f64 * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn standard_resolutions() {
        let g = Grid::centered_pi(2, 128).unwrap();
        assert!((g.spacing() - 2.0 * PI / 128.0).abs() < 1e-15);
        assert!((g.spacing() - 0.0491).abs() < 1e-4);
        let g3 = Grid::centered_pi(3, 128).unwrap();
        assert_eq!(g3.len(), 128 * 128 * 128);
        assert_eq!(g3.spacing(), g.spacing());
    }

    #[test]
    fn node_coordinates() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let coords: Vec<f64> = (0..8).map(|i| g.coord(i)).collect();
        assert_eq!(coords, vec![-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(1, 16, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(2, 7, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
    }

    #[test]
    fn layout_is_row_major_last_fastest() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        assert_eq!(g.flat(&[0, 0, 1]), 1);
        assert_eq!(g.flat(&[0, 1, 0]), 8);
        assert_eq!(g.flat(&[1, 0, 0]), 64);
        assert_eq!(g.unflat(g.flat(&[3, 5, 7]))[..3], [3, 5, 7]);
        assert_eq!(g.neighbor(g.flat(&[0, 0, 7]), 2, 1), g.flat(&[0, 0, 0]));
        assert_eq!(g.neighbor(g.flat(&[0, 0, 0]), 0, -1), g.flat(&[7, 0, 0]));
    }

    #[test]
    fn sample_examples() {
        let g = Grid::centered_pi(2, 32).unwrap();
        let ones = ScalarField::sample(g, |_| 1.0).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
        let xs = ScalarField::sample(g, |x| x[0]).unwrap();
        let cosx = ScalarField::sample(g, |x| x[0].cos()).unwrap();
        for i in 0..g.len() {
            let idx = g.unflat(i);
            assert_eq!(xs.values()[i], g.coord(idx[0]));
            assert_eq!(cosx.values()[i], g.coord(idx[0]).cos());
        }
        assert!(ScalarField::sample(g, |x| 1.0 / x[0].abs().min(0.0)).is_err());
    }

    #[test]
    fn indicator_bytes_must_be_binary() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let mut bytes = vec![0u8; 64];
        bytes[3] = 1;
        assert_eq!(
            IndicatorField::from_bytes(g, &bytes)
                .unwrap()
                .count_inside(),
            1
        );
        bytes[5] = 2;
        assert!(IndicatorField::from_bytes(g, &bytes).is_err());
    }

    proptest! {
        #[test]
        fn wrap_round_trip(n in 8usize..300, i in 0usize..300, s in -1000isize..1000) {
            let g = Grid::new(2, n, 1.0).unwrap();
            let i = i % n;
            let there = g.wrap(i as isize + s);
            prop_assert_eq!(g.wrap(there as isize - s), i);
        }
    }
}
