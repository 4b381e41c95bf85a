use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use threshrecon::distance::distance_brute;
use threshrecon::extract::{
    extract_iso, hausdorff, polyline_is_well_formed, self_intersections, Shape, DEGENERATE_AREA,
};
use threshrecon::solver::{
    energy_fac, init_guess, phi_alg2, run_adaptive, run_fixed_tau, threshold, Algorithm, InitSpec,
    SolveConfig, Weights,
};
use threshrecon::{Grid, IndicatorField, PointCloud, ScalarField, SpectralPlan};

fn ellipse_cloud(a: f64, b: f64, shift: [f64; 2], n: usize) -> PointCloud {
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let t = i as f64 / n as f64 * std::f64::consts::TAU;
            [shift[0] + a * t.cos(), shift[1] + b * t.sin()]
        })
        .collect();
    PointCloud::from_points(&pts).unwrap()
}

fn setup(cloud: &PointCloud, n: usize) -> (Grid, Weights, IndicatorField) {
    let g = Grid::centered_pi(2, n).unwrap();
    let d = distance_brute(cloud, &g).unwrap();
    let w = Weights::from_distance(&d, 2.0).unwrap();
    let u0 = init_guess(
        &InitSpec::Ball {
            center: vec![0.0, 0.0],
            radius: 2.5,
        },
        &g,
        None,
    )
    .unwrap();
    (g, w, u0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factored_energy_never_increases(
        a in 0.6f64..1.6, b in 0.6f64..1.6, sx in -0.3f64..0.3, sy in -0.3f64..0.3,
        tau in prop::sample::select(vec![0.02, 0.01, 0.005]),
    ) {
        let cloud = ellipse_cloud(a, b, [sx, sy], 80);
        let (g, w, u0) = setup(&cloud, 32);
        let mut plan = SpectralPlan::new(g);
        let cfg = SolveConfig { algorithm: Algorithm::Factored, tau, max_iter_per_tau: 200, ..SolveConfig::default() };
        let res = run_fixed_tau(&cfg, &u0, &w, &mut plan).unwrap();
        let energies = res.stage_energies(0);
        let slack = 1e-10 * energies[0].abs().max(1.0);
        for pair in energies.windows(2) {
            prop_assert!(pair[1] <= pair[0] + slack, "{} -> {}", pair[0], pair[1]);
        }
        prop_assert_eq!(res.energy_warnings, 0);
    }

    #[test]
    fn solves_are_deterministic_and_nontrivial(
        a in 0.8f64..1.6, b in 0.8f64..1.6, alg in 1u8..=2,
    ) {
        let cloud = ellipse_cloud(a, b, [0.0, 0.0], 80);
        let (g, w, u0) = setup(&cloud, 32);
        let cfg = SolveConfig {
            algorithm: Algorithm::from_number(alg).unwrap(),
            max_iter_per_tau: 200,
            ..SolveConfig::default()
        };
        let first = run_adaptive(&cfg, &u0, &w, &mut SpectralPlan::new(g)).unwrap();
        let second = run_adaptive(&cfg, &u0, &w, &mut SpectralPlan::new(g)).unwrap();
        prop_assert_eq!(&first.u_final, &second.u_final);
        prop_assert_eq!(&first.iterations_per_stage, &second.iterations_per_stage);
        prop_assert!(!first.u_final.is_all_inside() && !first.u_final.is_all_outside());
    }

    #[test]
    fn empty_and_full_are_fixed_points(seed in 0u64..1000, tau in 0.001f64..0.05) {
        let g = Grid::centered_pi(2, 16).unwrap();
        // positive weights on a random subset
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..g.len())
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.5..7.0) })
            .collect();
        let half = ScalarField::from_values(g, vals).unwrap();
        let mut plan = SpectralPlan::new(g);
        for inside in [false, true] {
            let u = IndicatorField::filled(g, inside);
            let next = threshold(&phi_alg2(&u, &half, tau, &mut plan).unwrap());
            prop_assert_eq!(next, u);
        }
    }

    #[test]
    fn one_convolution_per_factored_step(seed in 0u64..1000, tau in 0.001f64..0.05) {
        let g = Grid::centered_pi(2, 16).unwrap();
        let u = IndicatorField::from_predicate(g, |x| (x[0] * 1.3 + seed as f64).sin() > x[1]);
        let half = ScalarField::sample(g, |x| 0.1 + x[0].abs()).unwrap();
        let mut plan = SpectralPlan::new(g);
        plan.reset_counter();
        phi_alg2(&u, &half, tau, &mut plan).unwrap();
        prop_assert_eq!(plan.convolutions(), 1);
        energy_fac(&u, &half, tau, &mut plan).unwrap();
        prop_assert_eq!(plan.convolutions(), 2);
    }

    #[test]
    fn ellipse_contours_are_closed_and_simple(
        a in 0.5f64..2.0, b in 0.5f64..2.0, sx in -0.5f64..0.5, sy in -0.5f64..0.5,
    ) {
        let g = Grid::centered_pi(2, 64).unwrap();
        let f = ScalarField::sample(g, |x| {
            (((x[0] - sx) / a).powi(2) + ((x[1] - sy) / b).powi(2)).sqrt() - 1.0
        }).unwrap();
        let geom = extract_iso(&f, 0.0).unwrap();
        let curves = geom.as_curves().unwrap();
        prop_assert_eq!(curves.loops.len(), 1);
        prop_assert!(polyline_is_well_formed(curves));
        prop_assert_eq!(self_intersections(curves), 0);
        let area = std::f64::consts::PI * a * b;
        prop_assert!((curves.signed_area().abs() - area).abs() < 0.05 * area);
    }

    #[test]
    fn sphere_meshes_are_valid(r in 0.8f64..2.0, sz in -0.4f64..0.4) {
        let g = Grid::centered_pi(3, 24).unwrap();
        let f = ScalarField::sample(g, |x| (x[0] * x[0] + x[1] * x[1] + (x[2] - sz).powi(2)).sqrt() - r).unwrap();
        let geom = extract_iso(&f, 0.0).unwrap();
        let mesh = geom.as_surface().unwrap();
        for t in &mesh.triangles {
            prop_assert!(t.iter().all(|&i| i < mesh.vertices.len()));
            let [p, q, s] = t.map(|i| mesh.vertices[i]);
            let e1 = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
            let e2 = [s[0] - p[0], s[1] - p[1], s[2] - p[2]];
            let c = [e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2], e1[0] * e2[1] - e1[1] * e2[0]];
            prop_assert!(0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() > DEGENERATE_AREA);
        }
        prop_assert!(!geom.crosses_seam());
    }

    #[test]
    fn hausdorff_is_symmetric(r1 in 0.5f64..2.0, r2 in 0.5f64..2.0, dx in -0.5f64..0.5) {
        let c1 = move |s: f64| { let t = s * std::f64::consts::TAU; [r1 * t.cos(), r1 * t.sin()] };
        let c2 = move |s: f64| { let t = s * std::f64::consts::TAU; [dx + r2 * t.cos(), r2 * t.sin()] };
        let ab = hausdorff(&Shape::Curve(&c1), &Shape::Curve(&c2), 10_000).unwrap();
        let ba = hausdorff(&Shape::Curve(&c2), &Shape::Curve(&c1), 10_000).unwrap();
        prop_assert!((ab.distance - ba.distance).abs() < 1e-3);
        prop_assert!((ab.distance - ((r1 - r2).abs() + dx.abs())).abs() < 0.01 + 1e-3);
    }
}
