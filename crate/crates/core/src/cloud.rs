//! Point clouds: file ingestion, the synthetic generators used by the
//! reconstruction experiments, and additive Gaussian noise.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Identifier of the generator behind every seeded draw in this module.
pub const RNG_ALGORITHM: &str =
    "ChaCha8Rng (rand_chacha 0.9), normals via rand_distr::StandardNormal (ziggurat)";

/// Nonempty ordered list of 2D or 3D points, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidArgument(format!(
                "point clouds must be 2D or 3D, got dimension {dim}"
            )));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not form a nonempty list of {dim}D points",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                index: i / dim,
                value: coords[i],
            });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        Self::new(D, points.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Every point must lie strictly inside the grid's open domain.
    pub fn check_inside(&self, grid: &Grid) -> Result<()> {
        if self.dim != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: self.dim,
            });
        }
        let e = grid.extent();
        for (i, p) in self.points().enumerate() {
            if p.iter().any(|&c| !(c > -e && c < e)) {
                return Err(Error::PointOutsideDomain {
                    index: i,
                    coords: p.to_vec(),
                    extent: e,
                });
            }
        }
        Ok(())
    }

    /// Writes CSV rows after `#`-prefixed header lines.
    pub fn write_csv<W: Write>(&self, w: &mut W, header: &[String]) -> io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        for p in self.points() {
            let row: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Comma- or whitespace-separated columns; `#` lines and blank lines are skipped.
pub fn parse_cloud(text: &str, path: &Path) -> Result<PointCloud> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dim = None;
    let mut coords = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| parse_err(lineno + 1, format!("non-numeric token {t:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => {
                if row.len() != 2 && row.len() != 3 {
                    return Err(parse_err(
                        lineno + 1,
                        format!("expected 2 or 3 columns, found {}", row.len()),
                    ));
                }
                dim = Some(row.len());
            }
            Some(d) if d != row.len() => {
                return Err(parse_err(
                    lineno + 1,
                    format!("ragged row: {} columns where {d} were expected", row.len()),
                ));
            }
            Some(_) => {}
        }
        coords.extend(row);
    }
    match dim {
        Some(d) => PointCloud::new(d, coords),
        None => Err(parse_err(0, "file contains no points".into())),
    }
}

/// `.csv` and `.xyz` files share the same row grammar.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    parse_cloud(&text, path)
}

/// Radius profile of a star-shaped polar curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusProfile {
    /// `1 + 0.5 cos(5(θ - π/2))`
    FiveFold,
    /// `1 + 0.5 cos(3(θ - π/2))`
    ThreeFold,
    /// `1 + 0.4 sin(mθ)`
    MFold(u32),
    /// `base + amplitude * cos(m(θ - phase))`, for custom flowers.
    Custom {
        base: f64,
        amplitude: f64,
        m: u32,
        phase: f64,
    },
}

impl RadiusProfile {
    pub fn radius(&self, theta: f64) -> f64 {
        match *self {
            RadiusProfile::FiveFold => 1.0 + 0.5 * (5.0 * (theta - FRAC_PI_2)).cos(),
            RadiusProfile::ThreeFold => 1.0 + 0.5 * (3.0 * (theta - FRAC_PI_2)).cos(),
            RadiusProfile::MFold(m) => 1.0 + 0.4 * (m as f64 * theta).sin(),
            RadiusProfile::Custom {
                base,
                amplitude,
                m,
                phase,
            } => base + amplitude * (m as f64 * (theta - phase)).cos(),
        }
    }

    /// Point on the analytic curve at angle `theta`.
    pub fn point(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    fn min_radius(&self) -> f64 {
        match *self {
            RadiusProfile::FiveFold | RadiusProfile::ThreeFold => 0.5,
            RadiusProfile::MFold(_) => 0.6,
            RadiusProfile::Custom {
                base, amplitude, ..
            } => base - amplitude.abs(),
        }
    }
}

impl fmt::Display for RadiusProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusProfile::FiveFold => write!(f, "five-fold"),
            RadiusProfile::ThreeFold => write!(f, "three-fold"),
            RadiusProfile::MFold(m) => write!(f, "m-fold(m={m})"),
            RadiusProfile::Custom {
                base,
                amplitude,
                m,
                phase,
            } => write!(
                f,
                "custom(base={base}, amplitude={amplitude}, m={m}, phase={phase})"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarCloudSpec {
    pub n_points: usize,
    pub profile: RadiusProfile,
}

/// `n_points` samples at uniformly spaced angles `θ_i = 2π i / N`, `i = 0..N`.
pub fn gen_polar_cloud(spec: &PolarCloudSpec) -> Result<PointCloud> {
    if spec.n_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "polar clouds need at least 3 points, got {}",
            spec.n_points
        )));
    }
    if spec.profile.min_radius() <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius profile {} is not positive for every angle",
            spec.profile
        )));
    }
    let n = spec.n_points;
    let coords = (0..n)
        .flat_map(|i| spec.profile.point(2.0 * PI * i as f64 / n as f64))
        .collect();
    PointCloud::new(2, coords)
}

/// Torus with major radius 1 and minor radius 0.5 around the z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusCloudSpec {
    pub n_points: usize,
    pub seed: u64,
}

pub const TORUS_MAJOR: f64 = 1.0;
pub const TORUS_MINOR: f64 = 0.5;

/// Torus surface point for angles `(u, v)`; `u` runs around the tube.
pub fn torus_point(u: f64, v: f64) -> [f64; 3] {
    let ring = TORUS_MAJOR + TORUS_MINOR * u.cos();
    [ring * v.cos(), ring * v.sin(), TORUS_MINOR * u.sin()]
}

pub fn gen_torus_cloud(spec: &TorusCloudSpec) -> Result<PointCloud> {
    if spec.n_points < 4 {
        return Err(Error::InvalidArgument(format!(
            "torus clouds need at least 4 points, got {}",
            spec.n_points
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let two_pi = 2.0 * PI;
    let coords = (0..spec.n_points)
        .flat_map(|_| {
            let u = rng.random::<f64>() * two_pi;
            let v = rng.random::<f64>() * two_pi;
            torus_point(u, v)
        })
        .collect();
    PointCloud::new(3, coords)
}

/// Adds `mu * ν` to every coordinate with `ν` i.i.d. standard normal.
pub fn add_noise(cloud: &PointCloud, mu: f64, seed: u64) -> Result<PointCloud> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise intensity must be a finite non-negative number, got {mu}"
        )));
    }
    if mu == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = cloud
        .coords
        .iter()
        .map(|&c| {
            let nu: f64 = rng.sample(StandardNormal);
            c + mu * nu
        })
        .collect();
    PointCloud::new(cloud.dim, coords)
}
