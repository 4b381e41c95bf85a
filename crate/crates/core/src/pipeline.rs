//! End-to-end reconstruction: distance, weights, initial guess, thresholding,
//! extraction. The distance and weights are computed once per run.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use crate::cloud::PointCloud;
use crate::distance::{compute_distance, DistanceBackend};
use crate::error::Result;
use crate::extract::{extract_iso, Geometry, IsoSource};
use crate::grid::{Grid, ScalarField};
use crate::heat::{HeatKernel, SpectralPlan};
use crate::solver::{
    halving_schedule, init_guess, run_adaptive, run_fixed_tau, Algorithm, InitSpec, SolveConfig,
    SolveResult, TraceEntry, Weights,
};

/// Exponents below this give a non-Lipschitz `d^{p/2}` at the cloud.
pub const MIN_RECOMMENDED_P: f64 = 2.0;

/// Radius of the default 2D initial disc.
pub const DEFAULT_BALL_RADIUS: f64 = 2.0;

/// Default 3D level-set offset, in grid spacings.
pub const DEFAULT_SIGMA_SPACINGS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum TauPlan {
    Fixed(f64),
    Schedule(Vec<f64>),
}

impl TauPlan {
    pub fn taus(&self) -> Vec<f64> {
        match self {
            TauPlan::Fixed(t) => vec![*t],
            TauPlan::Schedule(s) => s.clone(),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, TauPlan::Schedule(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructConfig {
    pub cells: usize,
    pub extent: f64,
    pub p: f64,
    pub algorithm: Algorithm,
    pub tau: TauPlan,
    pub distance: DistanceBackend,
    /// `None` picks the dimension default: a disc of radius 2 in 2D, the
    /// `4h` distance level set in 3D.
    pub init: Option<InitSpec>,
    pub max_iter_per_tau: usize,
    pub log_energy: bool,
    pub kernel: HeatKernel,
    pub iso_source: IsoSource,
    /// Replaces the distance weight by a constant (the plain MBO limit).
    pub constant_weight: Option<f64>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            cells: 128,
            extent: std::f64::consts::PI,
            p: 2.0,
            algorithm: Algorithm::Factored,
            tau: TauPlan::Schedule(halving_schedule(0.02, 4)),
            distance: DistanceBackend::Auto,
            init: None,
            max_iter_per_tau: 500,
            log_energy: true,
            kernel: HeatKernel::default(),
            iso_source: IsoSource::default(),
            constant_weight: None,
        }
    }
}

impl ReconstructConfig {
    pub fn grid(&self, dim: usize) -> Result<Grid> {
        Grid::new(dim, self.cells, self.extent)
    }

    pub fn resolved_init(&self, grid: &Grid) -> InitSpec {
        match (&self.init, grid.dim()) {
            (Some(spec), _) => spec.clone(),
            (None, 2) => InitSpec::Ball {
                center: vec![0.0; 2],
                radius: DEFAULT_BALL_RADIUS,
            },
            (None, _) => InitSpec::LevelSet {
                sigma: DEFAULT_SIGMA_SPACINGS * grid.spacing(),
            },
        }
    }

    pub fn p_outside_recommended(&self) -> bool {
        self.p < MIN_RECOMMENDED_P
    }

    fn solve_config(&self) -> SolveConfig {
        let taus = self.tau.taus();
        SolveConfig {
            algorithm: self.algorithm,
            tau: taus[0],
            tau_schedule: taus,
            max_iter_per_tau: self.max_iter_per_tau,
            log_energy: self.log_energy,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    pub distance: Duration,
    pub weights: Duration,
    pub init: Duration,
    pub solve: Duration,
    pub extract: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.distance + self.weights + self.init + self.solve + self.extract
    }

    pub fn entries(&self) -> [(&'static str, Duration); 5] {
        [
            ("distance", self.distance),
            ("weights", self.weights),
            ("init", self.init),
            ("solve", self.solve),
            ("extract", self.extract),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub grid: Grid,
    pub distance: ScalarField,
    pub distance_backend: DistanceBackend,
    pub init: InitSpec,
    pub solve: SolveResult,
    /// Field the geometry was extracted from at level 0.5.
    pub iso_field: ScalarField,
    /// `None` when the final indicator is empty or fills the domain.
    pub geometry: Option<Geometry>,
    /// Convolutions spent by the solver, extraction excluded.
    pub convolutions: u64,
    pub timings: PhaseTimings,
    pub warnings: Vec<String>,
}

pub fn reconstruct(cloud: &PointCloud, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    let grid = cfg.grid(cloud.dim())?;
    cloud.check_inside(&grid)?;
    let mut timings = PhaseTimings::default();
    let mut warnings = Vec::new();
    if cfg.p_outside_recommended() {
        warnings.push(format!(
            "p = {} is below the recommended minimum {MIN_RECOMMENDED_P}",
            cfg.p
        ));
    }

    let t = Instant::now();
    let backend = cfg.distance.resolve(cloud, &grid);
    let distance = compute_distance(cloud, &grid, backend)?;
    timings.distance = t.elapsed();

    let t = Instant::now();
    let weights = match cfg.constant_weight {
        Some(v) => Weights::constant(grid, v)?,
        None => Weights::from_distance(&distance, cfg.p)?,
    };
    timings.weights = t.elapsed();

    let t = Instant::now();
    let init = cfg.resolved_init(&grid);
    let u0 = init_guess(&init, &grid, Some(&distance))?;
    timings.init = t.elapsed();

    let mut plan = SpectralPlan::with_kernel(grid, cfg.kernel);
    let solve_cfg = cfg.solve_config();
    let solve = match cfg.tau {
        TauPlan::Fixed(_) => run_fixed_tau(&solve_cfg, &u0, &weights, &mut plan)?,
        TauPlan::Schedule(_) => run_adaptive(&solve_cfg, &u0, &weights, &mut plan)?,
    };
    timings.solve = solve.wall_time;
    let convolutions = plan.convolutions();
    if !solve.converged {
        warnings.push(format!(
            "solver did not converge: stage outcomes {:?}",
            solve.stage_outcomes
        ));
    }

    let t = Instant::now();
    let raw = solve.u_final.to_scalar();
    let iso_field = match cfg.iso_source {
        IsoSource::Raw => raw,
        IsoSource::Mollified => {
            let tau_last = *solve.stage_taus.last().expect("at least one stage ran");
            plan.convolve(&raw, tau_last)?
        }
    };
    let geometry = match extract_iso(&iso_field, 0.5) {
        Ok(g) => Some(g),
        Err(e) => {
            warnings.push(format!("no geometry extracted: {e}"));
            None
        }
    };
    if geometry.as_ref().is_some_and(Geometry::crosses_seam) {
        warnings.push("extracted geometry touches the periodic seam".into());
    }
    timings.extract = t.elapsed();

    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Reconstruction {
        grid,
        distance,
        distance_backend: backend,
        init,
        solve,
        iso_field,
        geometry,
        convolutions,
        timings,
        warnings,
    })
}

/// Rows `stage,tau,iteration,energy,nodes_flipped`; missing energies are empty.
pub fn write_energy_trace<W: Write>(w: &mut W, trace: &[TraceEntry]) -> io::Result<()> {
    writeln!(w, "stage,tau,iteration,energy,nodes_flipped")?;
    for e in trace {
        let energy = e.energy.map(|v| format!("{v:.17e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            e.stage, e.tau, e.iteration, energy, e.nodes_flipped
        )?;
    }
    Ok(())
}
