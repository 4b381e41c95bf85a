//! Threshold-dynamics iterations for the distance-weighted perimeter energy.
//!
//! Both algorithms alternate a linearization `φ^k` of the approximate energy at
//! the current indicator `u^k` with the pointwise minimizer
//! `u^{k+1} = 1 where φ^k ≤ 0, else 0`:
//!
//! * [`Algorithm::Symmetric`]: `φ = w G_τ*(1-2u) + G_τ*(w (1-2u))` with `w = d^p`,
//!   linearizing `½√(π/τ) ∫ w u G_τ*(1-u) + w (1-u) G_τ*u`. Two convolutions.
//! * [`Algorithm::Factored`]: `φ = G_τ*(ψ (1-2u))` with `ψ = d^(p/2)`,
//!   linearizing `√(π/τ) ∫ ψ u G_τ*(ψ (1-u))`. One convolution. Because the
//!   kernel is symmetric positive semi-definite this energy never increases
//!   from one iteration to the next; every run checks it.
//!
//! [`run_adaptive`] restarts the fixed-τ iteration along a decreasing τ
//! sequence, which frees indicators that pin on the grid at small τ.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use crate::distance::{weight_field, WeightMode};
use crate::error::{Error, Result};
use crate::grid::{Grid, IndicatorField, ScalarField};
use crate::heat::{gauss_convolve, SpectralPlan};

/// Relative slack on the factored-energy decrease check.
pub const ENERGY_DECAY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Symmetric energy, two convolutions per iteration.
    Symmetric,
    /// Factored energy, one convolution per iteration, provably monotone.
    Factored,
}

impl Algorithm {
    pub fn number(&self) -> u8 {
        match self {
            Algorithm::Symmetric => 1,
            Algorithm::Factored => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Algorithm::Symmetric),
            2 => Ok(Algorithm::Factored),
            _ => Err(Error::InvalidArgument(format!(
                "algorithm must be 1 or 2, got {n}"
            ))),
        }
    }
}

/// `d^p` and `d^(p/2)` for one distance field.
#[derive(Debug, Clone)]
pub struct Weights {
    pub full: ScalarField,
    pub half: ScalarField,
}

impl Weights {
    pub fn from_distance(d: &ScalarField, p: f64) -> Result<Self> {
        Ok(Self {
            full: weight_field(d, p, WeightMode::Full)?,
            half: weight_field(d, p, WeightMode::Half)?,
        })
    }

    /// Uniform weights; with `value = 1` the iteration is plain mean-curvature MBO.
    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        if value < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "weights must be non-negative, got {value}"
            )));
        }
        Ok(Self {
            full: ScalarField::constant(grid, value * value)?,
            half: ScalarField::constant(grid, value)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.full.grid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    /// Used by [`run_fixed_tau`].
    pub tau: f64,
    /// Strictly decreasing; used by [`run_adaptive`].
    pub tau_schedule: Vec<f64>,
    pub max_iter_per_tau: usize,
    /// Evaluate the energy every iteration (one extra convolution each).
    pub log_energy: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Factored,
            tau: 0.0025,
            tau_schedule: halving_schedule(0.02, 4),
            max_iter_per_tau: 500,
            log_energy: true,
        }
    }
}

/// `first, first/2, …`, `len` entries.
pub fn halving_schedule(first: f64, len: usize) -> Vec<f64> {
    (0..len).map(|i| first / f64::powi(2.0, i as i32)).collect()
}

fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tau must be positive, got {tau}"
        )))
    }
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("tau schedule is empty".into()));
    }
    for &t in schedule {
        validate_tau(t)?;
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "tau schedule must be strictly decreasing, got {schedule:?}"
        )));
    }
    Ok(())
}

/// Initial indicator.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// `|x_a| < half_widths[a]` on every axis.
    Box { half_widths: Vec<f64> },
    /// `|x - center| <= radius`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `d(x) <= sigma`.
    LevelSet { sigma: f64 },
}

pub fn init_guess(spec: &InitSpec, grid: &Grid, d: Option<&ScalarField>) -> Result<IndicatorField> {
    let dim = grid.dim();
    let u = match spec {
        InitSpec::Box { half_widths } => {
            if half_widths.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: half_widths.len(),
                });
            }
            IndicatorField::from_predicate(*grid, |x| {
                x.iter().zip(half_widths).all(|(c, w)| c.abs() < *w)
            })
        }
        InitSpec::Ball { center, radius } => {
            if center.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: center.len(),
                });
            }
            let r2 = radius * radius;
            IndicatorField::from_predicate(*grid, |x| {
                x.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    <= r2
            })
        }
        InitSpec::LevelSet { sigma } => {
            if sigma.is_nan() || *sigma <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            let d = d.ok_or_else(|| {
                Error::InvalidArgument("level-set initialization needs a distance field".into())
            })?;
            grid.check_same(d.grid())?;
            let values = d.values().iter().map(|&v| v <= *sigma).collect();
            IndicatorField::from_values(*grid, values)?
        }
    };
    if u.is_all_outside() {
        return Err(Error::Degenerate(format!(
            "initial guess {spec:?} selects no node"
        )));
    }
    if u.is_all_inside() {
        return Err(Error::Degenerate(format!(
            "initial guess {spec:?} selects every node"
        )));
    }
    Ok(u)
}

/// `1 - 2u` scaled nodewise by `w`.
fn signed_weight(u: &IndicatorField, w: &ScalarField) -> ScalarField {
    let values = u
        .values()
        .iter()
        .zip(w.values())
        .map(|(&inside, &wv)| if inside { -wv } else { wv })
        .collect();
    ScalarField::from_finite(*u.grid(), values)
}

fn check_grids(u: &IndicatorField, w: &ScalarField, plan: &SpectralPlan) -> Result<()> {
    plan.grid().check_same(u.grid())?;
    plan.grid().check_same(w.grid())
}

/// `φ = w G_τ*(1-2u) + G_τ*(w (1-2u))`, two convolutions.
pub fn phi_alg1(
    u: &IndicatorField,
    w_full: &ScalarField,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<ScalarField> {
    check_grids(u, w_full, plan)?;
    let ones = ScalarField::from_finite(*u.grid(), vec![1.0; u.grid().len()]);
    let a = gauss_convolve(&signed_weight(u, &ones), tau, plan)?;
    let b = gauss_convolve(&signed_weight(u, w_full), tau, plan)?;
    let values = w_full
        .values()
        .iter()
        .zip(a.values())
        .zip(b.values())
        .map(|((w, a), b)| w * a + b)
        .collect();
    Ok(ScalarField::from_finite(*u.grid(), values))
}

/// `φ = G_τ*(ψ (1-2u))`, one convolution.
pub fn phi_alg2(
    u: &IndicatorField,
    w_half: &ScalarField,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<ScalarField> {
    check_grids(u, w_half, plan)?;
    gauss_convolve(&signed_weight(u, w_half), tau, plan)
}

/// `u = 1` where `φ <= 0`, `0` elsewhere.
pub fn threshold(phi: &ScalarField) -> IndicatorField {
    let values = phi.values().iter().map(|&v| v <= 0.0).collect();
    IndicatorField::from_values(*phi.grid(), values).expect("same grid")
}

/// Symmetric energy `½√(π/τ) ∫ w u G_τ*(1-u) + w (1-u) G_τ*u`.
pub fn energy_sym(
    u: &IndicatorField,
    w_full: &ScalarField,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<f64> {
    check_grids(u, w_full, plan)?;
    let dim = u.grid().dim();
    // G*(1-u) = G*1 - G*u, and G*1 is the constant mean-mode multiplier
    let g1 = plan.mode_multiplier(&vec![0; dim], tau);
    let gu = gauss_convolve(&u.to_scalar(), tau, plan)?;
    let sum: f64 = u
        .values()
        .iter()
        .zip(w_full.values())
        .zip(gu.values())
        .map(|((&inside, &w), &g)| if inside { w * (g1 - g) } else { w * g })
        .sum();
    Ok(0.5 * (PI / tau).sqrt() * sum * u.grid().cell_volume())
}

/// Factored energy `√(π/τ) ∫ ψ u G_τ*(ψ (1-u))`.
pub fn energy_fac(
    u: &IndicatorField,
    w_half: &ScalarField,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<f64> {
    check_grids(u, w_half, plan)?;
    let outside: Vec<f64> = u
        .values()
        .iter()
        .zip(w_half.values())
        .map(|(&inside, &w)| if inside { 0.0 } else { w })
        .collect();
    let g = gauss_convolve(&ScalarField::from_finite(*u.grid(), outside), tau, plan)?;
    let sum: f64 = u
        .values()
        .iter()
        .zip(w_half.values())
        .zip(g.values())
        .filter(|((&inside, _), _)| inside)
        .map(|((_, &w), &gv)| w * gv)
        .sum();
    Ok((PI / tau).sqrt() * sum * u.grid().cell_volume())
}

/// Energy matching the algorithm's linearization.
pub fn energy(
    algorithm: Algorithm,
    u: &IndicatorField,
    weights: &Weights,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<f64> {
    match algorithm {
        Algorithm::Symmetric => energy_sym(u, &weights.full, tau, plan),
        Algorithm::Factored => energy_fac(u, &weights.half, tau, plan),
    }
}

fn phi(
    algorithm: Algorithm,
    u: &IndicatorField,
    weights: &Weights,
    tau: f64,
    plan: &mut SpectralPlan,
) -> Result<ScalarField> {
    match algorithm {
        Algorithm::Symmetric => phi_alg1(u, &weights.full, tau, plan),
        Algorithm::Factored => phi_alg2(u, &weights.half, tau, plan),
    }
}

/// One record per iteration. Iteration 0 is the stage's starting indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub stage: usize,
    pub tau: f64,
    pub iteration: usize,
    pub energy: Option<f64>,
    pub nodes_flipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    /// No node changed.
    Converged,
    /// `u^{k+1} = u^{k-1} ≠ u^k`.
    Cycle,
    /// Hit `max_iter_per_tau`.
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u_final: IndicatorField,
    pub energy_trace: Vec<TraceEntry>,
    pub iterations_per_stage: Vec<usize>,
    pub stage_outcomes: Vec<StageOutcome>,
    pub stage_taus: Vec<f64>,
    /// The last stage reached a fixed point.
    pub converged: bool,
    pub cycle_detected: bool,
    /// Two consecutive adaptive stages produced the same indicator.
    pub stages_agreed: bool,
    /// Symmetric-energy increases seen (expected zero, not guaranteed).
    pub energy_warnings: usize,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn total_iterations(&self) -> usize {
        self.iterations_per_stage.iter().sum()
    }

    /// Energy values of one stage, in iteration order.
    pub fn stage_energies(&self, stage: usize) -> Vec<f64> {
        self.energy_trace
            .iter()
            .filter(|e| e.stage == stage)
            .filter_map(|e| e.energy)
            .collect()
    }
}

struct Stage {
    u: IndicatorField,
    trace: Vec<TraceEntry>,
    iterations: usize,
    outcome: StageOutcome,
    warnings: usize,
}

fn run_stage(
    stage: usize,
    cfg: &SolveConfig,
    tau: f64,
    u0: &IndicatorField,
    weights: &Weights,
    plan: &mut SpectralPlan,
) -> Result<Stage> {
    let algorithm = cfg.algorithm;
    let mut trace = Vec::new();
    let mut warnings = 0;
    let mut current = u0.clone();
    let mut previous: Option<IndicatorField> = None;

    let mut last_energy = if cfg.log_energy {
        Some(energy(algorithm, &current, weights, tau, plan)?)
    } else {
        None
    };
    let slack = ENERGY_DECAY_SLACK * last_energy.unwrap_or(0.0).max(1.0);
    trace.push(TraceEntry {
        stage,
        tau,
        iteration: 0,
        energy: last_energy,
        nodes_flipped: 0,
    });

    for k in 1..=cfg.max_iter_per_tau {
        let next = threshold(&phi(algorithm, &current, weights, tau, plan)?);
        let flipped = next.hamming(&current);
        if flipped == 0 {
            trace.push(TraceEntry {
                stage,
                tau,
                iteration: k,
                energy: last_energy,
                nodes_flipped: 0,
            });
            return Ok(Stage {
                u: current,
                trace,
                iterations: k,
                outcome: StageOutcome::Converged,
                warnings,
            });
        }
        let e = if cfg.log_energy {
            let e = energy(algorithm, &next, weights, tau, plan)?;
            let before = last_energy.expect("logged from the start");
            if e > before + slack {
                match algorithm {
                    Algorithm::Factored => {
                        return Err(Error::EnergyIncrease {
                            stage,
                            iteration: k,
                            before,
                            after: e,
                            tolerance: slack,
                        })
                    }
                    Algorithm::Symmetric => {
                        warnings += 1;
                        log::warn!(
                            "symmetric energy increased at stage {stage}, iteration {k}: {before:e} -> {e:e}"
                        );
                    }
                }
            }
            Some(e)
        } else {
            None
        };
        last_energy = e;
        trace.push(TraceEntry {
            stage,
            tau,
            iteration: k,
            energy: e,
            nodes_flipped: flipped,
        });
        if previous.as_ref() == Some(&next) {
            return Ok(Stage {
                u: next,
                trace,
                iterations: k,
                outcome: StageOutcome::Cycle,
                warnings,
            });
        }
        previous = Some(std::mem::replace(&mut current, next));
    }
    Ok(Stage {
        u: current,
        trace,
        iterations: cfg.max_iter_per_tau,
        outcome: StageOutcome::IterationCap,
        warnings,
    })
}

fn check_run(
    cfg: &SolveConfig,
    u0: &IndicatorField,
    weights: &Weights,
    plan: &SpectralPlan,
) -> Result<()> {
    if cfg.max_iter_per_tau == 0 {
        return Err(Error::InvalidArgument(
            "max_iter_per_tau must be at least 1".into(),
        ));
    }
    plan.grid().check_same(u0.grid())?;
    plan.grid().check_same(weights.grid())
}

/// Iterates at `cfg.tau` until no node changes, a 2-cycle appears, or the cap is hit.
pub fn run_fixed_tau(
    cfg: &SolveConfig,
    u0: &IndicatorField,
    weights: &Weights,
    plan: &mut SpectralPlan,
) -> Result<SolveResult> {
    validate_tau(cfg.tau)?;
    let schedule = SolveConfig {
        tau_schedule: vec![cfg.tau],
        ..cfg.clone()
    };
    run_adaptive(&schedule, u0, weights, plan)
}

/// Runs each τ of the schedule from the previous stage's output; stops after
/// the first stage whose output equals its input stage's output.
pub fn run_adaptive(
    cfg: &SolveConfig,
    u0: &IndicatorField,
    weights: &Weights,
    plan: &mut SpectralPlan,
) -> Result<SolveResult> {
    validate_schedule(&cfg.tau_schedule)?;
    check_run(cfg, u0, weights, plan)?;
    let start = Instant::now();
    let mut result = SolveResult {
        u_final: u0.clone(),
        energy_trace: Vec::new(),
        iterations_per_stage: Vec::new(),
        stage_outcomes: Vec::new(),
        stage_taus: Vec::new(),
        converged: false,
        cycle_detected: false,
        stages_agreed: false,
        energy_warnings: 0,
        wall_time: Duration::ZERO,
    };
    for (s, &tau) in cfg.tau_schedule.iter().enumerate() {
        let stage = run_stage(s, cfg, tau, &result.u_final, weights, plan)?;
        if stage.outcome != StageOutcome::Converged {
            log::info!("stage {s} (tau {tau}) ended with {:?}", stage.outcome);
        }
        let same = s > 0 && stage.u == result.u_final;
        result.energy_trace.extend(stage.trace);
        result.iterations_per_stage.push(stage.iterations);
        result.stage_outcomes.push(stage.outcome);
        result.stage_taus.push(tau);
        result.cycle_detected |= stage.outcome == StageOutcome::Cycle;
        result.energy_warnings += stage.warnings;
        result.converged = stage.outcome == StageOutcome::Converged;
        result.u_final = stage.u;
        if same {
            result.stages_agreed = true;
            break;
        }
    }
    result.wall_time = start.elapsed();
    Ok(result)
}
