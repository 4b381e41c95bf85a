use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};
use threshrecon::cloud::{
    add_noise, gen_polar_cloud, gen_torus_cloud, load_cloud, torus_point, PolarCloudSpec,
    RadiusProfile, TorusCloudSpec,
};
use threshrecon::distance::{distance_sweep, DistanceBackend, SweepConfig};
use threshrecon::extract::{extract_iso, hausdorff, Geometry, HausdorffReport, IsoSource, Shape};
use threshrecon::grid::dump::{self, Dump};
use threshrecon::pipeline::{
    reconstruct, write_energy_trace, ReconstructConfig, Reconstruction, TauPlan,
};
use threshrecon::solver::{halving_schedule, Algorithm, InitSpec};
use threshrecon::{Grid, HeatKernel, PointCloud, SpectralPlan};

use crate::args::{
    DistChoice, DistanceArgs, ExtractArgs, GenerateArgs, Generator, GridArgs, InitChoice,
    IsoChoice, KernelChoice, ReconstructArgs, Reference, SolverArgs,
};
use crate::failure::{Failure, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::manifest::{FileRecord, Outputs, RunManifest};

/// Samples per side for Hausdorff comparisons.
pub const HAUSDORFF_SAMPLES: usize = 20_000;

/// `first:count` halves `first` `count - 1` times; otherwise a comma list.
pub fn parse_schedule(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = |why: &str| Failure::BadInput(format!("bad schedule {text:?}: {why}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let taus = match text.split_once(':') {
        Some((first, count)) => {
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| bad("count is not an integer"))?;
            if count == 0 {
                return Err(bad("count must be at least 1"));
            }
            halving_schedule(number(first)?, count)
        }
        None => text.split(',').map(number).collect::<Result<_, _>>()?,
    };
    if taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(bad("every entry must be positive"));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(bad("entries must be strictly decreasing"));
    }
    Ok(taus)
}

pub fn parse_list(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::BadInput(format!("bad {what} {text:?}")))
}

fn backend(choice: DistChoice, grid: &Grid) -> DistanceBackend {
    match choice {
        DistChoice::Auto => DistanceBackend::Auto,
        DistChoice::Brute => DistanceBackend::Brute,
        DistChoice::Sweep => DistanceBackend::Sweep(SweepConfig::for_grid(grid)),
    }
}

fn tau_plan(solver: &SolverArgs) -> Result<TauPlan, Failure> {
    if solver.no_adaptive || solver.tau.is_some() {
        return Ok(TauPlan::Fixed(solver.tau.unwrap_or(0.0025)));
    }
    let text = solver.schedule.as_deref().unwrap_or("0.02:4");
    Ok(TauPlan::Schedule(parse_schedule(text)?))
}

fn init_spec(solver: &SolverArgs, dim: usize) -> Result<Option<InitSpec>, Failure> {
    let choice = solver.init.or(if solver.radius.is_some() {
        Some(InitChoice::Ball)
    } else if solver.box_half_widths.is_some() {
        Some(InitChoice::Box)
    } else if solver.sigma.is_some() {
        Some(InitChoice::Levelset)
    } else {
        None
    });
    Ok(match choice {
        None => None,
        Some(InitChoice::Ball) => Some(InitSpec::Ball {
            center: vec![0.0; dim],
            radius: solver
                .radius
                .unwrap_or(threshrecon::pipeline::DEFAULT_BALL_RADIUS),
        }),
        Some(InitChoice::Box) => {
            let half_widths = match &solver.box_half_widths {
                Some(text) => parse_list(text, "box half-widths")?,
                None if dim == 2 => vec![2.0, 2.0],
                None => vec![1.6, 1.6, 0.6],
            };
            Some(InitSpec::Box { half_widths })
        }
        // without --sigma the caller fills in 4h
        Some(InitChoice::Levelset) => solver.sigma.map(|sigma| InitSpec::LevelSet { sigma }),
    })
}

pub fn reconstruct_config(
    grid: &GridArgs,
    solver: &SolverArgs,
    dim: usize,
) -> Result<ReconstructConfig, Failure> {
    let g = Grid::new(dim, grid.grid, grid.extent)?;
    let mut init = init_spec(solver, dim)?;
    if solver.init == Some(InitChoice::Levelset) && init.is_none() {
        init = Some(InitSpec::LevelSet {
            sigma: threshrecon::pipeline::DEFAULT_SIGMA_SPACINGS * g.spacing(),
        });
    }
    Ok(ReconstructConfig {
        cells: grid.grid,
        extent: grid.extent,
        p: solver.p,
        algorithm: Algorithm::from_number(solver.alg)?,
        tau: tau_plan(solver)?,
        distance: backend(grid.dist, &g),
        init,
        max_iter_per_tau: solver.max_iter,
        log_energy: !solver.no_energy_log,
        kernel: match solver.kernel {
            KernelChoice::Sampled => HeatKernel::SampledGaussian,
            KernelChoice::Exact => HeatKernel::ExactSemigroup,
        },
        iso_source: match solver.iso_source {
            IsoChoice::Raw => IsoSource::Raw,
            IsoChoice::Mollified => IsoSource::Mollified,
        },
        constant_weight: None,
    })
}

pub fn config_json(cfg: &ReconstructConfig, init: &InitSpec) -> Value {
    let (mode, taus) = match &cfg.tau {
        TauPlan::Fixed(t) => ("fixed", vec![*t]),
        TauPlan::Schedule(s) => ("adaptive", s.clone()),
    };
    json!({
        "grid": cfg.cells,
        "extent": cfg.extent,
        "p": cfg.p,
        "p_outside_recommended_range": cfg.p_outside_recommended(),
        "algorithm": cfg.algorithm.number(),
        "tau_mode": mode,
        "taus": taus,
        "distance": cfg.distance.name(),
        "init": format!("{init:?}"),
        "max_iter_per_tau": cfg.max_iter_per_tau,
        "log_energy": cfg.log_energy,
        "kernel": format!("{:?}", cfg.kernel),
        "iso_source": cfg.iso_source.name(),
    })
}

pub fn reference_error(
    geometry: &Geometry,
    reference: Reference,
    m: u32,
) -> Result<HausdorffReport, Failure> {
    let profile = match reference {
        Reference::FiveFold => RadiusProfile::FiveFold,
        Reference::ThreeFold => RadiusProfile::ThreeFold,
        Reference::MFold => RadiusProfile::MFold(m),
        Reference::Torus => {
            let torus = |s: f64, t: f64| torus_point(2.0 * PI * s, 2.0 * PI * t);
            return Ok(hausdorff(
                &Shape::from(geometry),
                &Shape::Patch(&torus),
                HAUSDORFF_SAMPLES,
            )?);
        }
    };
    let curve = move |t: f64| profile.point(2.0 * PI * t);
    Ok(hausdorff(
        &Shape::from(geometry),
        &Shape::Curve(&curve),
        HAUSDORFF_SAMPLES,
    )?)
}

/// Writes `curve.csv` + `curve.svg` (2D) or `surface.obj` (3D).
pub fn write_geometry(
    out: &mut Outputs,
    geometry: &Geometry,
    cloud: Option<&PointCloud>,
    extent: f64,
) -> Result<(), Failure> {
    match geometry {
        Geometry::Curves(p) => {
            out.write("curve.csv", |w| p.write_csv(w))?;
            out.write("curve.svg", |w| p.write_svg(w, extent, cloud))?;
        }
        Geometry::Surface(m) => {
            out.write("surface.obj", |w| m.write_obj(w))?;
        }
    }
    Ok(())
}

fn geometry_summary(geometry: Option<&Geometry>) -> Value {
    match geometry {
        Some(Geometry::Curves(p)) => json!({
            "kind": "curves",
            "loops": p.loops.len(),
            "vertices": p.vertex_count(),
            "length": p.length(),
            "crosses_seam": p.crosses_seam,
        }),
        Some(Geometry::Surface(m)) => json!({
            "kind": "surface",
            "vertices": m.vertices.len(),
            "triangles": m.triangles.len(),
            "area": m.area(),
            "crosses_seam": m.crosses_seam,
        }),
        None => Value::Null,
    }
}

pub fn print_metrics(pairs: &[(&str, String)]) {
    for (k, v) in pairs {
        println!("{k}={v}");
    }
}

pub fn generate(args: &GenerateArgs) -> Result<u8, Failure> {
    let start = Instant::now();
    let base = match args.generator {
        Generator::Torus => gen_torus_cloud(&TorusCloudSpec {
            n_points: args.n,
            seed: args.seed,
        })?,
        other => {
            let profile = match other {
                Generator::FiveFold => RadiusProfile::FiveFold,
                Generator::ThreeFold => RadiusProfile::ThreeFold,
                _ => RadiusProfile::MFold(args.m),
            };
            gen_polar_cloud(&PolarCloudSpec {
                n_points: args.n,
                profile,
            })?
        }
    };
    let cloud = add_noise(&base, args.noise, args.seed)?;
    let config = json!({
        "generator": format!("{:?}", args.generator),
        "n": args.n,
        "m": args.m,
        "noise": args.noise,
        "seed": args.seed,
    });
    let mut out = Outputs::create(&args.out)?;
    let header = vec![
        format!(
            "generator={:?} n={} m={} noise={} seed={}",
            args.generator, args.n, args.m, args.noise, args.seed
        ),
        format!("rng={}", threshrecon::cloud::RNG_ALGORITHM),
    ];
    out.write(&args.name, |w| cloud.write_csv(w, &header))?;
    let mut manifest = RunManifest::new("generate", config);
    manifest.seed = Some(args.seed);
    manifest.timing("generate", start.elapsed());
    manifest.results = json!({ "points": cloud.len(), "dim": cloud.dim() });
    out.finish(manifest)?;
    print_metrics(&[
        ("points", cloud.len().to_string()),
        ("dim", cloud.dim().to_string()),
    ]);
    Ok(EXIT_OK)
}

fn load_input(path: &Path) -> Result<(PointCloud, FileRecord), Failure> {
    let cloud = load_cloud(path)?;
    Ok((cloud, FileRecord::read(path)?))
}

pub fn distance(args: &DistanceArgs) -> Result<u8, Failure> {
    let (cloud, input) = load_input(&args.grid.cloud)?;
    let grid = Grid::new(cloud.dim(), args.grid.grid, args.grid.extent)?;
    cloud.check_inside(&grid)?;
    let chosen = backend(args.grid.dist, &grid).resolve(&cloud, &grid);
    let start = Instant::now();
    let (field, rounds) = match chosen {
        DistanceBackend::Sweep(cfg) => {
            let o = distance_sweep(&cloud, &grid, &cfg)?;
            (o.field, Some(o.rounds))
        }
        other => (
            threshrecon::distance::compute_distance(&cloud, &grid, other)?,
            None,
        ),
    };
    let elapsed = start.elapsed();
    let mut out = Outputs::create(&args.out)?;
    out.write("distance.trf", |w| dump::write_scalar(w, &field))?;
    if args.csv {
        out.write("distance.csv", |w| dump::write_scalar_csv(w, &field))?;
    }
    let mut manifest = RunManifest::new(
        "distance",
        json!({ "grid": args.grid.grid, "extent": args.grid.extent, "backend": chosen.name() }),
    );
    manifest.inputs.push(input);
    manifest.timing("distance", elapsed);
    manifest.results = json!({ "min": field.min(), "max": field.max(), "sweep_rounds": rounds });
    out.finish(manifest)?;
    print_metrics(&[
        ("backend", chosen.name().to_string()),
        ("min", field.min().to_string()),
        ("max", field.max().to_string()),
    ]);
    Ok(EXIT_OK)
}

/// Writes every artifact of a finished reconstruction into `out` (manifest excluded).
pub fn write_reconstruction(
    out: &mut Outputs,
    r: &Reconstruction,
    cloud: &PointCloud,
) -> Result<(), Failure> {
    out.write("indicator.trf", |w| {
        dump::write_indicator(w, &r.solve.u_final)
    })?;
    out.write("energy_trace.csv", |w| {
        write_energy_trace(w, &r.solve.energy_trace)
    })?;
    if let Some(g) = &r.geometry {
        write_geometry(out, g, Some(cloud), r.grid.extent())?;
    }
    Ok(())
}

pub fn reconstruction_results(r: &Reconstruction, error: Option<&HausdorffReport>) -> Value {
    json!({
        "converged": r.solve.converged,
        "cycle_detected": r.solve.cycle_detected,
        "stages_agreed": r.solve.stages_agreed,
        "stage_taus": r.solve.stage_taus,
        "iterations_per_stage": r.solve.iterations_per_stage,
        "stage_outcomes": r.solve.stage_outcomes.iter().map(|o| format!("{o:?}")).collect::<Vec<_>>(),
        "total_iterations": r.solve.total_iterations(),
        "convolutions": r.convolutions,
        "final_energy": r.solve.energy_trace.iter().rev().find_map(|e| e.energy),
        "energy_warnings": r.solve.energy_warnings,
        "inside_nodes": r.solve.u_final.count_inside(),
        "distance_backend": r.distance_backend.name(),
        "geometry": geometry_summary(r.geometry.as_ref()),
        "hausdorff": error.map(|e| json!({
            "distance": e.distance,
            "in_grid_spacings": e.distance / r.grid.spacing(),
            "samples": [e.samples_a, e.samples_b],
        })),
    })
}

pub fn record_timings(manifest: &mut RunManifest, r: &Reconstruction) {
    for (phase, d) in r.timings.entries() {
        manifest.timing(phase, d);
    }
}

pub fn reconstruct_cmd(args: &ReconstructArgs) -> Result<u8, Failure> {
    let (cloud, input) = load_input(&args.grid.cloud)?;
    let cfg = reconstruct_config(&args.grid, &args.solver, cloud.dim())?;
    let r = reconstruct(&cloud, &cfg)?;
    let error = match (&r.geometry, args.reference) {
        (Some(g), Some(reference)) => Some(reference_error(g, reference, args.m)?),
        _ => None,
    };
    let mut out = Outputs::create(&args.out)?;
    write_reconstruction(&mut out, &r, &cloud)?;
    let code = if r.solve.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    let mut manifest = RunManifest::new("reconstruct", config_json(&cfg, &r.init));
    manifest.inputs.push(input);
    manifest.seed = args.seed;
    manifest.warnings = r.warnings.clone();
    manifest.results = reconstruction_results(&r, error.as_ref());
    manifest.exit_code = code;
    record_timings(&mut manifest, &r);
    out.finish(manifest)?;

    let h = r.grid.spacing();
    let mut metrics = vec![
        ("converged", r.solve.converged.to_string()),
        ("iterations", r.solve.total_iterations().to_string()),
        ("stages", r.solve.stage_taus.len().to_string()),
        ("convolutions", r.convolutions.to_string()),
        (
            "solve_seconds",
            format!("{:.6}", r.timings.solve.as_secs_f64()),
        ),
    ];
    if let Some(e) = &error {
        metrics.push(("hausdorff", format!("{:.6}", e.distance)));
        metrics.push(("hausdorff_h", format!("{:.4}", e.distance / h)));
    }
    print_metrics(&metrics);
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(code)
}

pub fn extract_cmd(args: &ExtractArgs) -> Result<u8, Failure> {
    let bytes = fs::read(&args.field).map_err(|e| Failure::io(&args.field, e))?;
    let input = FileRecord::read(&args.field)?;
    let field = match dump::decode(&bytes)? {
        Dump::Scalar(f) => f,
        Dump::Indicator(u) => u.to_scalar(),
    };
    let start = Instant::now();
    let field = match args.mollify {
        Some(tau) => SpectralPlan::new(*field.grid()).convolve(&field, tau)?,
        None => field,
    };
    let geometry = extract_iso(&field, args.iso)?;
    let elapsed = start.elapsed();
    let mut out = Outputs::create(&args.out)?;
    write_geometry(&mut out, &geometry, None, field.grid().extent())?;
    let mut manifest = RunManifest::new(
        "extract",
        json!({ "iso": args.iso, "mollify": args.mollify }),
    );
    manifest.inputs.push(input);
    manifest.timing("extract", elapsed);
    manifest.results = geometry_summary(Some(&geometry));
    out.finish(manifest)?;
    let summary = geometry_summary(Some(&geometry));
    let pairs: Vec<(&str, String)> = summary
        .as_object()
        .map(|o| o.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect())
        .unwrap_or_default();
    print_metrics(&pairs);
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        assert_eq!(
            parse_schedule("0.02:4").unwrap(),
            vec![0.02, 0.01, 0.005, 0.0025]
        );
        assert_eq!(parse_schedule("0.02:5").unwrap().len(), 5);
        assert_eq!(
            parse_schedule("0.02, 0.015,0.01").unwrap(),
            vec![0.02, 0.015, 0.01]
        );
        for bad in ["0.02:0", "x:3", "0.01,0.02", "0.01,-1", ""] {
            assert!(parse_schedule(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn lists() {
        assert_eq!(
            parse_list("1.6,1.6,0.6", "box").unwrap(),
            vec![1.6, 1.6, 0.6]
        );
        assert!(parse_list("1,a", "box").is_err());
    }
}
