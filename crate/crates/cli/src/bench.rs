//! Experiment suites. Cases run one after another so wall times are not
//! distorted by each other; each case gets its own directory and manifest,
//! and the suite table and manifest are written at the end.

use std::io::Write;

use serde::Serialize;
use serde_json::json;
use threshrecon::cloud::{
    add_noise, gen_polar_cloud, gen_torus_cloud, PolarCloudSpec, RadiusProfile, TorusCloudSpec,
};
use threshrecon::cloud::{TORUS_MAJOR, TORUS_MINOR};
use threshrecon::extract::{hausdorff, Geometry, Shape};
use threshrecon::pipeline::{reconstruct, ReconstructConfig, Reconstruction, TauPlan};
use threshrecon::solver::{Algorithm, InitSpec};
use threshrecon::PointCloud;

use crate::args::{BenchArgs, Reference, Suite};
use crate::commands::{
    config_json, parse_schedule, reconstruction_results, record_timings, reference_error,
    write_reconstruction, HAUSDORFF_SAMPLES,
};
use crate::failure::{Failure, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::manifest::{Outputs, RunManifest};

#[derive(Debug, Clone, Default, Serialize)]
pub struct BenchRow {
    pub suite: String,
    pub case: String,
    pub grid: usize,
    pub points: usize,
    pub algorithm: u8,
    pub p: f64,
    pub noise: f64,
    pub taus: String,
    pub iterations: usize,
    pub converged: bool,
    pub wall_seconds: f64,
    pub solve_seconds: f64,
    pub initial_energy: Option<f64>,
    pub final_energy: Option<f64>,
    pub energy_monotone: Option<bool>,
    pub hausdorff: Option<f64>,
    pub hausdorff_h: Option<f64>,
    pub rms_residual_h: Option<f64>,
}

const COLUMNS: &str =
    "suite,case,grid,points,algorithm,p,noise,taus,iterations,converged,wall_seconds,\
solve_seconds,initial_energy,final_energy,energy_monotone,hausdorff,hausdorff_h,rms_residual_h";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl BenchRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{},{},{},{},{}",
            self.suite,
            self.case,
            self.grid,
            self.points,
            self.algorithm,
            self.p,
            self.noise,
            self.taus,
            self.iterations,
            self.converged,
            self.wall_seconds,
            self.solve_seconds,
            opt(self.initial_energy),
            opt(self.final_energy),
            opt(self.energy_monotone),
            opt(self.hausdorff),
            opt(self.hausdorff_h),
            opt(self.rms_residual_h),
        )
    }
}

struct Case {
    name: String,
    cloud: PointCloud,
    cfg: ReconstructConfig,
    reference: Option<Reference>,
    m: u32,
    noise: f64,
}

struct Finished {
    row: BenchRow,
    geometry: Option<Geometry>,
    converged: bool,
}

fn polar(profile: RadiusProfile, n: usize) -> Result<PointCloud, Failure> {
    Ok(gen_polar_cloud(&PolarCloudSpec {
        n_points: n,
        profile,
    })?)
}

fn schedule(args: &BenchArgs, default: &str) -> Result<TauPlan, Failure> {
    Ok(TauPlan::Schedule(parse_schedule(
        args.schedule.as_deref().unwrap_or(default),
    )?))
}

fn base(cells: usize, tau: TauPlan) -> ReconstructConfig {
    ReconstructConfig {
        cells,
        tau,
        ..Default::default()
    }
}

fn torus_rms(r: &Reconstruction) -> Option<f64> {
    let mesh = r.geometry.as_ref()?.as_surface()?;
    let sq: f64 = mesh
        .vertices
        .iter()
        .map(|v| {
            (((v[0].hypot(v[1]) - TORUS_MAJOR).powi(2) + v[2] * v[2]).sqrt() - TORUS_MINOR).powi(2)
        })
        .sum();
    Some((sq / mesh.vertices.len() as f64).sqrt() / r.grid.spacing())
}

fn cases(args: &BenchArgs) -> Result<Vec<Case>, Failure> {
    let mut out = Vec::new();
    let case = |name: String, cloud, cfg, reference, m, noise| Case {
        name,
        cloud,
        cfg,
        reference,
        m,
        noise,
    };
    match args.suite {
        Suite::MfoldRuntime => {
            for m in 3..=8 {
                let cfg = ReconstructConfig {
                    log_energy: false,
                    ..base(128, schedule(args, "0.02:4")?)
                };
                out.push(case(
                    format!("m{m}"),
                    polar(RadiusProfile::MFold(m), 200)?,
                    cfg,
                    Some(Reference::MFold),
                    m,
                    0.0,
                ));
            }
        }
        Suite::EnergyDecay => {
            let cloud = polar(RadiusProfile::ThreeFold, 100)?;
            for alg in [Algorithm::Symmetric, Algorithm::Factored] {
                for tau in [0.02, 0.01, 0.005] {
                    let cfg = ReconstructConfig {
                        algorithm: alg,
                        ..base(128, TauPlan::Fixed(tau))
                    };
                    let name = format!("alg{}-tau{tau}", alg.number());
                    out.push(case(
                        name,
                        cloud.clone(),
                        cfg,
                        Some(Reference::ThreeFold),
                        3,
                        0.0,
                    ));
                }
                let cfg = ReconstructConfig {
                    algorithm: alg,
                    ..base(128, schedule(args, "0.02:4")?)
                };
                let name = format!("alg{}-adaptive", alg.number());
                out.push(case(
                    name,
                    cloud.clone(),
                    cfg,
                    Some(Reference::ThreeFold),
                    3,
                    0.0,
                ));
            }
        }
        Suite::PSweep => {
            let cloud = polar(RadiusProfile::FiveFold, 200)?;
            for p in [1.0, 2.0, 3.0, 4.0, 5.0] {
                let cfg = ReconstructConfig {
                    p,
                    ..base(128, schedule(args, "0.02:4")?)
                };
                out.push(case(
                    format!("p{p}"),
                    cloud.clone(),
                    cfg,
                    Some(Reference::FiveFold),
                    5,
                    0.0,
                ));
            }
        }
        Suite::NoiseSweep => {
            let clean = polar(RadiusProfile::FiveFold, 200)?;
            for mu in [0.01, 0.02, 0.04, 0.08] {
                let cloud = add_noise(&clean, mu, args.seed)?;
                let cfg = base(128, schedule(args, "0.02:4")?);
                out.push(case(
                    format!("mu{mu}"),
                    cloud,
                    cfg,
                    Some(Reference::FiveFold),
                    5,
                    mu,
                ));
            }
        }
        Suite::ResolutionSweep => {
            for cells in [64, 128, 256] {
                for n in [100, 200, 300, 400] {
                    let cfg = base(cells, schedule(args, "0.01:4")?);
                    let cloud = polar(RadiusProfile::FiveFold, n)?;
                    out.push(case(
                        format!("grid{cells}-n{n}"),
                        cloud,
                        cfg,
                        Some(Reference::FiveFold),
                        5,
                        0.0,
                    ));
                }
            }
        }
        Suite::Torus3d => {
            let cloud = gen_torus_cloud(&TorusCloudSpec {
                n_points: 2000,
                seed: args.seed,
            })?;
            let cfg = ReconstructConfig {
                init: Some(InitSpec::Box {
                    half_widths: vec![1.6, 1.6, 0.6],
                }),
                log_energy: false,
                ..base(64, schedule(args, "0.02:4")?)
            };
            out.push(case(
                "torus64".into(),
                cloud,
                cfg,
                Some(Reference::Torus),
                0,
                0.0,
            ));
        }
    }
    Ok(out)
}

fn suite_name(s: Suite) -> &'static str {
    match s {
        Suite::MfoldRuntime => "mfold-runtime",
        Suite::EnergyDecay => "energy-decay",
        Suite::PSweep => "p-sweep",
        Suite::NoiseSweep => "noise-sweep",
        Suite::ResolutionSweep => "resolution-sweep",
        Suite::Torus3d => "torus-3d",
    }
}

fn run_case(
    suite: &str,
    c: &Case,
    args: &BenchArgs,
    outputs: &mut Outputs,
) -> Result<Finished, Failure> {
    let r = reconstruct(&c.cloud, &c.cfg)?;
    let error = match (&r.geometry, c.reference) {
        (Some(g), Some(reference)) => Some(reference_error(g, reference, c.m)?),
        _ => None,
    };
    let mut out = Outputs::create(&outputs.dir().join(&c.name))?;
    out.write("cloud.csv", |w| {
        c.cloud.write_csv(w, &[format!("case={}", c.name)])
    })?;
    write_reconstruction(&mut out, &r, &c.cloud)?;
    let mut manifest = RunManifest::new(
        &format!("bench {suite} {}", c.name),
        config_json(&c.cfg, &r.init),
    );
    manifest.seed = Some(args.seed);
    manifest.warnings = r.warnings.clone();
    manifest.results = reconstruction_results(&r, error.as_ref());
    manifest.exit_code = if r.solve.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    record_timings(&mut manifest, &r);
    outputs.adopt(out.finish(manifest)?);

    let energies: Vec<f64> = r
        .solve
        .energy_trace
        .iter()
        .filter_map(|e| e.energy)
        .collect();
    let monotone = (c.cfg.tau.taus().len() == 1 && !energies.is_empty()).then(|| {
        let slack = 1e-10 * energies[0].abs().max(f64::MIN_POSITIVE);
        energies.windows(2).all(|w| w[1] <= w[0] + slack)
    });
    let h = r.grid.spacing();
    let row = BenchRow {
        suite: suite.to_string(),
        case: c.name.clone(),
        grid: c.cfg.cells,
        points: c.cloud.len(),
        algorithm: c.cfg.algorithm.number(),
        p: c.cfg.p,
        noise: c.noise,
        taus: c
            .cfg
            .tau
            .taus()
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(" "),
        iterations: r.solve.total_iterations(),
        converged: r.solve.converged,
        wall_seconds: r.timings.total().as_secs_f64(),
        solve_seconds: r.timings.solve.as_secs_f64(),
        initial_energy: energies.first().copied(),
        final_energy: energies.last().copied(),
        energy_monotone: monotone,
        hausdorff: error.map(|e| e.distance),
        hausdorff_h: error.map(|e| e.distance / h),
        rms_residual_h: torus_rms(&r),
    };
    Ok(Finished {
        row,
        geometry: r.geometry,
        converged: r.solve.converged,
    })
}

pub fn bench(args: &BenchArgs) -> Result<u8, Failure> {
    let suite = suite_name(args.suite);
    let cases = cases(args)?;
    let mut outputs = Outputs::create(&args.out.join(suite))?;
    let mut finished = Vec::with_capacity(cases.len());
    for c in &cases {
        log::info!("{suite}: running {}", c.name);
        let f = run_case(suite, c, args, &mut outputs)?;
        println!("{}", f.row.csv());
        finished.push(f);
    }
    let rows: Vec<&BenchRow> = finished.iter().map(|f| &f.row).collect();
    outputs.write("results.csv", |w| {
        writeln!(w, "{COLUMNS}")?;
        for r in &rows {
            writeln!(w, "{}", r.csv())?;
        }
        Ok(())
    })?;
    outputs.write("results.jsonl", |w| {
        for r in &rows {
            serde_json::to_writer(&mut *w, r)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    if args.suite == Suite::PSweep {
        let mut lines = vec!["case_a,case_b,hausdorff,hausdorff_h".to_string()];
        for i in 0..finished.len() {
            for j in i + 1..finished.len() {
                let (Some(a), Some(b)) = (&finished[i].geometry, &finished[j].geometry) else {
                    continue;
                };
                let d = hausdorff(&Shape::from(a), &Shape::from(b), HAUSDORFF_SAMPLES)?.distance;
                let h = 2.0 * cases[i].cfg.extent / cases[i].cfg.cells as f64;
                lines.push(format!("{},{},{d},{}", cases[i].name, cases[j].name, d / h));
            }
        }
        outputs.write("pairwise.csv", |w| writeln!(w, "{}", lines.join("\n")))?;
    }
    let code = if finished.iter().all(|f| f.converged) {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    };
    let mut manifest = RunManifest::new(
        &format!("bench {suite}"),
        json!({ "suite": suite, "seed": args.seed, "schedule_override": args.schedule, "cases": cases.len() }),
    );
    manifest.seed = Some(args.seed);
    manifest.results = json!({ "rows": rows });
    manifest.exit_code = code;
    let total: f64 = rows.iter().map(|r| r.wall_seconds).sum();
    manifest.timings.insert("cases_total".into(), total);
    outputs.finish(manifest)?;
    Ok(code)
}
